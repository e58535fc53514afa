/**
 * Foreground masks at feature-grid resolution.
 *
 * The built-in stand-in segments by luminance against a dark background
 * (real deployments plug a segmentation model); the pixel mask is then
 * majority-pooled: a grid cell is foreground iff more than half of its
 * pixels are.
 */

import { RgbImage } from './image.js'
import { MaskGrid } from './format.js'
import { gridSize } from './descriptor.js'

export const LUMINANCE_THRESHOLD = 0.08

export function pixelMask(img: RgbImage, threshold = LUMINANCE_THRESHOLD): Uint8Array {
  const out = new Uint8Array(img.width * img.height)
  for (let i = 0; i < out.length; i++) out[i] = img.lum[i] > threshold ? 1 : 0
  return out
}

export function poolMask(bits: Uint8Array, height: number, width: number,
                         stride: number): MaskGrid {
  const gh = gridSize(height, stride)
  const gw = gridSize(width, stride)
  const out = new Uint8Array(gh * gw)
  for (let gr = 0; gr < gh; gr++) {
    for (let gc = 0; gc < gw; gc++) {
      const r1 = Math.min(height, (gr + 1) * stride)
      const c1 = Math.min(width, (gc + 1) * stride)
      let fg = 0
      let n = 0
      for (let y = gr * stride; y < r1; y++) {
        for (let x = gc * stride; x < c1; x++) {
          fg += bits[y * width + x]
          n++
        }
      }
      out[gr * gw + gc] = fg * 2 > n ? 1 : 0
    }
  }
  return { height: gh, width: gw, bits: out }
}

export function extractMask(img: RgbImage, stride: number): MaskGrid {
  return poolMask(pixelMask(img), img.height, img.width, stride)
}
