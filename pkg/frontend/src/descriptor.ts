/**
 * Built-in deterministic patch descriptor.
 *
 * A stand-in backbone for environments without model weights: each grid cell
 * gets local color/gradient statistics over its stride x stride patch (plus a
 * 3x3 cell context ring), projected to the requested channel count by a
 * fixed seeded random matrix and unit-normalized. Two independent blocks can
 * be concatenated ("backbone" first, "diffusion" second) before a joint
 * normalization, mirroring how concatenated foundation features are combined.
 *
 * Everything is a pure function of the pixels, so extraction is bit-for-bit
 * reproducible across runs and machines.
 */

import { RgbImage } from './image.js'
import { FeatureGrid } from './format.js'

export interface DescriptorOptions {
  stride: number
  channels: number
  withDiffusion: boolean
}

export function gridSize(imageSide: number, stride: number): number {
  return Math.ceil(imageSide / stride)
}

/** mulberry32: tiny deterministic PRNG for the projection matrices. */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0
  return () => {
    a = (a + 0x6d2b79f5) >>> 0
    let t = a
    t = Math.imul(t ^ (t >>> 15), t | 1)
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61)
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296
  }
}

function gaussianMatrix(rows: number, cols: number, seed: number): Float64Array {
  const rand = mulberry32(seed)
  const out = new Float64Array(rows * cols)
  for (let i = 0; i < out.length; i += 2) {
    // Box-Muller
    const u = Math.max(rand(), 1e-12)
    const v = rand()
    const m = Math.sqrt(-2 * Math.log(u))
    out[i] = m * Math.cos(2 * Math.PI * v)
    if (i + 1 < out.length) out[i + 1] = m * Math.sin(2 * Math.PI * v)
  }
  return out
}

const ORIENT_BINS = 8
// raw statistics: mean/std RGB (6), mean |dx| |dy| (2), orientation
// histogram (8), patch mean luminance (1), 3x3 context means (9), bias (1)
const RAW_DIM = 6 + 2 + ORIENT_BINS + 1 + 9 + 1

function patchStats(img: RgbImage, r0: number, r1: number, c0: number, c1: number,
                    out: Float64Array, offset: number): void {
  const { width, r, g, b, lum } = img
  let n = 0
  let mr = 0, mg = 0, mb = 0, ml = 0
  let sr = 0, sg = 0, sb = 0
  let adx = 0, ady = 0
  const hist = new Array(ORIENT_BINS).fill(0)
  for (let y = r0; y < r1; y++) {
    for (let x = c0; x < c1; x++) {
      const i = y * width + x
      mr += r[i]; mg += g[i]; mb += b[i]; ml += lum[i]
      n++
      const xm = x > 0 ? lum[i - 1] : lum[i]
      const xp = x < width - 1 ? lum[i + 1] : lum[i]
      const ym = y > 0 ? lum[i - width] : lum[i]
      const yp = y < img.height - 1 ? lum[i + width] : lum[i]
      const dx = (xp - xm) / 2
      const dy = (yp - ym) / 2
      adx += Math.abs(dx)
      ady += Math.abs(dy)
      const mag = Math.hypot(dx, dy)
      if (mag > 1e-6) {
        let ang = Math.atan2(dy, dx)
        if (ang < 0) ang += 2 * Math.PI
        const bin = Math.min(ORIENT_BINS - 1, Math.floor((ang / (2 * Math.PI)) * ORIENT_BINS))
        hist[bin] += mag
      }
    }
  }
  mr /= n; mg /= n; mb /= n; ml /= n
  for (let y = r0; y < r1; y++) {
    for (let x = c0; x < c1; x++) {
      const i = y * width + x
      sr += (r[i] - mr) ** 2
      sg += (g[i] - mg) ** 2
      sb += (b[i] - mb) ** 2
    }
  }
  out[offset] = mr
  out[offset + 1] = mg
  out[offset + 2] = mb
  out[offset + 3] = Math.sqrt(sr / n)
  out[offset + 4] = Math.sqrt(sg / n)
  out[offset + 5] = Math.sqrt(sb / n)
  out[offset + 6] = adx / n
  out[offset + 7] = ady / n
  for (let k = 0; k < ORIENT_BINS; k++) out[offset + 8 + k] = hist[k] / n
  out[offset + 8 + ORIENT_BINS] = ml
}

/** Per-cell raw statistics for the whole grid (RAW_DIM per cell). */
function rawGrid(img: RgbImage, stride: number, context: number): Float64Array {
  const gh = gridSize(img.height, stride)
  const gw = gridSize(img.width, stride)
  const raw = new Float64Array(gh * gw * RAW_DIM)
  const cellMeanLum = new Float64Array(gh * gw)
  const s = stride * context // context > 1 widens the receptive field
  for (let gr = 0; gr < gh; gr++) {
    for (let gc = 0; gc < gw; gc++) {
      const cr = gr * stride + stride / 2
      const cc = gc * stride + stride / 2
      const r0 = Math.max(0, Math.round(cr - s / 2))
      const r1 = Math.min(img.height, Math.max(r0 + 1, Math.round(cr + s / 2)))
      const c0 = Math.max(0, Math.round(cc - s / 2))
      const c1 = Math.min(img.width, Math.max(c0 + 1, Math.round(cc + s / 2)))
      const off = (gr * gw + gc) * RAW_DIM
      patchStats(img, r0, r1, c0, c1, raw, off)
      cellMeanLum[gr * gw + gc] = raw[off + 8 + ORIENT_BINS]
    }
  }
  // 3x3 context ring of cell mean luminances, plus the constant bias term
  for (let gr = 0; gr < gh; gr++) {
    for (let gc = 0; gc < gw; gc++) {
      const off = (gr * gw + gc) * RAW_DIM + 8 + ORIENT_BINS + 1
      let k = 0
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) {
          const rr = Math.min(gh - 1, Math.max(0, gr + dr))
          const cc2 = Math.min(gw - 1, Math.max(0, gc + dc))
          raw[off + k] = cellMeanLum[rr * gw + cc2]
          k++
        }
      }
      raw[off + 9] = 1.0 // bias: cells are never all-zero
    }
  }
  return raw
}

function project(raw: Float64Array, cells: number, channels: number,
                 seed: number, out: Float64Array, chanOffset: number,
                 totalChannels: number): void {
  const A = gaussianMatrix(channels, RAW_DIM, seed)
  for (let cell = 0; cell < cells; cell++) {
    const rOff = cell * RAW_DIM
    const oOff = cell * totalChannels + chanOffset
    for (let ch = 0; ch < channels; ch++) {
      let acc = 0
      const aOff = ch * RAW_DIM
      for (let k = 0; k < RAW_DIM; k++) acc += A[aOff + k] * raw[rOff + k]
      out[oOff + ch] = acc
    }
  }
}

export function extractFeatures(img: RgbImage, opts: DescriptorOptions): FeatureGrid {
  const gh = gridSize(img.height, opts.stride)
  const gw = gridSize(img.width, opts.stride)
  const cells = gh * gw
  const blocks = opts.withDiffusion ? 2 : 1
  const total = opts.channels * blocks
  const acc = new Float64Array(cells * total)
  project(rawGrid(img, opts.stride, 1), cells, opts.channels, 0xa11ce, acc, 0, total)
  if (opts.withDiffusion) {
    // coarser receptive field, separate projection; joint normalization below
    project(rawGrid(img, opts.stride, 3), cells, opts.channels, 0xd1ff5, acc,
            opts.channels, total)
  }
  const data = new Float32Array(cells * total)
  for (let cell = 0; cell < cells; cell++) {
    let norm = 0
    for (let ch = 0; ch < total; ch++) norm += acc[cell * total + ch] ** 2
    norm = Math.sqrt(norm)
    for (let ch = 0; ch < total; ch++) {
      data[cell * total + ch] = norm > 0 ? acc[cell * total + ch] / norm : 0
    }
  }
  return { height: gh, width: gw, channels: total, data }
}
