/** PNG loading into a planar float image in [0, 1]. */

import { promises as fs } from 'fs'
import { PNG } from 'pngjs'

export interface RgbImage {
  width: number
  height: number
  /** length H*W each */
  r: Float32Array
  g: Float32Array
  b: Float32Array
  /** luminance, length H*W */
  lum: Float32Array
}

export async function loadPng(path: string): Promise<RgbImage> {
  const raw = await fs.readFile(path)
  const png = PNG.sync.read(raw)
  const n = png.width * png.height
  const r = new Float32Array(n)
  const g = new Float32Array(n)
  const b = new Float32Array(n)
  const lum = new Float32Array(n)
  for (let i = 0; i < n; i++) {
    r[i] = png.data[4 * i] / 255
    g[i] = png.data[4 * i + 1] / 255
    b[i] = png.data[4 * i + 2] / 255
    lum[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]
  }
  return { width: png.width, height: png.height, r, g, b, lum }
}

export function savePng(path: string, width: number, height: number,
                        rgb: (i: number) => [number, number, number]): Buffer {
  const png = new PNG({ width, height })
  for (let i = 0; i < width * height; i++) {
    const [r, g, b] = rgb(i)
    png.data[4 * i] = Math.max(0, Math.min(255, Math.round(r)))
    png.data[4 * i + 1] = Math.max(0, Math.min(255, Math.round(g)))
    png.data[4 * i + 2] = Math.max(0, Math.min(255, Math.round(b)))
    png.data[4 * i + 3] = 255
  }
  return PNG.sync.write(png)
}
