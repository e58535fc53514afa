/**
 * Optional TensorFlow.js graph-model backbone.
 *
 * When a local model directory (model.json + weight shards) is supplied, the
 * image is fed through it and the last spatial output is resampled to the
 * stride grid and unit-normalized. TensorFlow.js is imported lazily so the
 * package works without it; any load or inference failure surfaces as a
 * per-job error and the caller decides whether to fall back.
 */

import { promises as fs } from 'fs'
import * as path from 'path'

import { RgbImage } from './image.js'
import { FeatureGrid } from './format.js'
import { gridSize } from './descriptor.js'

// tfjs is an optional integration; see src/tfjs.d.ts for the loose typing
type TF = typeof import('@tensorflow/tfjs')

async function loadTf(): Promise<TF> {
  try {
    return await import('@tensorflow/tfjs')
  } catch (e) {
    throw new Error(`@tensorflow/tfjs is not installed: ${(e as Error).message}`)
  }
}

/** Minimal file-system IO handler (tfjs-node is not required). */
function fileSystemHandler(tf: TF, dir: string) {
  return {
    load: async () => {
      const modelJson = JSON.parse(
        await fs.readFile(path.join(dir, 'model.json'), 'utf-8'),
      )
      const manifest = modelJson.weightsManifest as Array<{
        paths: string[]
        weights: unknown[]
      }>
      const buffers: Buffer[] = []
      for (const group of manifest) {
        for (const p of group.paths) {
          buffers.push(await fs.readFile(path.join(dir, p)))
        }
      }
      const joined = Buffer.concat(buffers)
      return {
        modelTopology: modelJson.modelTopology,
        format: modelJson.format,
        generatedBy: modelJson.generatedBy,
        convertedBy: modelJson.convertedBy,
        weightSpecs: manifest.flatMap(g => g.weights),
        weightData: joined.buffer.slice(
          joined.byteOffset, joined.byteOffset + joined.byteLength,
        ),
      } as never
    },
  }
}

export async function extractWithModel(img: RgbImage, modelDir: string,
                                       stride: number): Promise<FeatureGrid> {
  const tf = await loadTf()
  const model = await tf.loadGraphModel(fileSystemHandler(tf, modelDir) as never)
  const n = img.width * img.height
  const pixels = new Float32Array(n * 3)
  for (let i = 0; i < n; i++) {
    pixels[3 * i] = img.r[i]
    pixels[3 * i + 1] = img.g[i]
    pixels[3 * i + 2] = img.b[i]
  }
  const input = tf.tensor4d(pixels, [1, img.height, img.width, 3])
  const raw = model.execute(input)
  const shape = raw.shape
  if (shape.length !== 4) {
    throw new Error(`expected a spatial [1, h, w, c] output, got ${shape}`)
  }
  const [, mh, mw, mc] = shape as [number, number, number, number]
  const values = (await raw.data()) as Float32Array
  input.dispose()
  raw.dispose()

  const gh = gridSize(img.height, stride)
  const gw = gridSize(img.width, stride)
  const data = new Float32Array(gh * gw * mc)
  for (let gr = 0; gr < gh; gr++) {
    for (let gc = 0; gc < gw; gc++) {
      const sr = Math.min(mh - 1, Math.floor((gr + 0.5) * (mh / gh)))
      const sc = Math.min(mw - 1, Math.floor((gc + 0.5) * (mw / gw)))
      let norm = 0
      const src = (sr * mw + sc) * mc
      for (let ch = 0; ch < mc; ch++) norm += values[src + ch] ** 2
      norm = Math.sqrt(norm)
      const dst = (gr * gw + gc) * mc
      for (let ch = 0; ch < mc; ch++) {
        data[dst + ch] = norm > 0 ? values[src + ch] / norm : 0
      }
    }
  }
  return { height: gh, width: gw, channels: mc, data }
}
