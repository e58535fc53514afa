/** Batch extraction job: images in, .fmap/.msk files out. */

import { promises as fs } from 'fs'
import * as path from 'path'

import { loadPng } from './image.js'
import { extractFeatures } from './descriptor.js'
import { extractMask } from './segment.js'
import { extractWithModel } from './model.js'
import { encodeFeatureMap, encodeMask, writeAtomic } from './format.js'

export interface ExtractionJob {
  imagesDir: string
  outDir: string
  stride: number
  channels: number
  withDiffusion: boolean
  masks: boolean
  modelDir?: string
}

export interface FileResult {
  image: string
  ok: boolean
  error?: string
  gridHeight?: number
  gridWidth?: number
  channels?: number
}

export async function listImages(dir: string): Promise<string[]> {
  const entries = await fs.readdir(dir)
  return entries.filter(e => e.toLowerCase().endsWith('.png')).sort()
}

export async function runJob(job: ExtractionJob,
                             log: (line: string) => void = () => {}): Promise<FileResult[]> {
  const images = await listImages(job.imagesDir)
  if (images.length === 0) {
    throw new Error(`no .png images in ${job.imagesDir}`)
  }
  await fs.mkdir(job.outDir, { recursive: true })
  const results: FileResult[] = []
  let channels: number | undefined
  for (const name of images) {
    const stem = name.replace(/\.png$/i, '')
    try {
      const img = await loadPng(path.join(job.imagesDir, name))
      const grid = job.modelDir
        ? await extractWithModel(img, job.modelDir, job.stride)
        : extractFeatures(img, {
            stride: job.stride,
            channels: job.channels,
            withDiffusion: job.withDiffusion,
          })
      if (channels === undefined) channels = grid.channels
      if (grid.channels !== channels) {
        throw new Error(
          `channel dim ${grid.channels} differs from the job's ${channels}`,
        )
      }
      await writeAtomic(path.join(job.outDir, `${stem}.fmap`), encodeFeatureMap(grid))
      if (job.masks) {
        await writeAtomic(path.join(job.outDir, `${stem}.msk`),
                          encodeMask(extractMask(img, job.stride)))
      }
      results.push({
        image: name, ok: true,
        gridHeight: grid.height, gridWidth: grid.width, channels: grid.channels,
      })
      log(`${name} -> ${grid.height}x${grid.width}x${grid.channels}`)
    } catch (e) {
      // per-file failure: report and continue with the rest of the job
      results.push({ image: name, ok: false, error: (e as Error).message })
      log(`${name} FAILED: ${(e as Error).message}`)
    }
  }
  return results
}
