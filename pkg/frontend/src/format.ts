/**
 * Bit-exact writers/readers for the meshpose on-disk formats.
 *
 * .fmap  "FMAP" | u16 version(=1) | u16 reserved | u32 H | u32 W | u32 C |
 *        H*W*C float32, row-major, channel-fastest (all little-endian)
 * .msk   "MSK1" | u16 H | u16 W | H*W bytes (0/1)
 *
 * Writes are atomic: a temp file in the destination directory is renamed
 * into place once complete.
 */

import { promises as fs } from 'fs'
import * as path from 'path'

export const MAX_SIDE = 1 << 16

export interface FeatureGrid {
  height: number
  width: number
  channels: number
  /** length H*W*C, channel-fastest */
  data: Float32Array
}

export interface MaskGrid {
  height: number
  width: number
  /** length H*W, truthy = foreground */
  bits: Uint8Array
}

function checkSides(h: number, w: number) {
  if (!(h > 0 && w > 0 && h < MAX_SIDE && w < MAX_SIDE)) {
    throw new Error(`grid sides must be in (0, ${MAX_SIDE}), got ${h}x${w}`)
  }
}

export function encodeFeatureMap(grid: FeatureGrid): Buffer {
  const { height: h, width: w, channels: c, data } = grid
  checkSides(h, w)
  if (data.length !== h * w * c) {
    throw new Error(`payload length ${data.length} != ${h}x${w}x${c}`)
  }
  const buf = Buffer.alloc(20 + data.length * 4)
  buf.write('FMAP', 0, 'ascii')
  buf.writeUInt16LE(1, 4)
  buf.writeUInt16LE(0, 6)
  buf.writeUInt32LE(h, 8)
  buf.writeUInt32LE(w, 12)
  buf.writeUInt32LE(c, 16)
  for (let i = 0; i < data.length; i++) buf.writeFloatLE(data[i], 20 + 4 * i)
  return buf
}

export function decodeFeatureMap(buf: Buffer): FeatureGrid {
  if (buf.length < 4 || buf.toString('ascii', 0, 4) !== 'FMAP') {
    throw new Error('not a feature map (bad magic)')
  }
  if (buf.length < 20) throw new Error('feature map header truncated')
  const version = buf.readUInt16LE(4)
  if (version !== 1) throw new Error(`unsupported feature map version ${version}`)
  const h = buf.readUInt32LE(8)
  const w = buf.readUInt32LE(12)
  const c = buf.readUInt32LE(16)
  checkSides(h, w)
  const n = h * w * c
  if (buf.length < 20 + 4 * n) throw new Error('feature map payload truncated')
  const data = new Float32Array(n)
  for (let i = 0; i < n; i++) data[i] = buf.readFloatLE(20 + 4 * i)
  return { height: h, width: w, channels: c, data }
}

export function encodeMask(mask: MaskGrid): Buffer {
  const { height: h, width: w, bits } = mask
  checkSides(h, w)
  if (bits.length !== h * w) {
    throw new Error(`mask length ${bits.length} != ${h}x${w}`)
  }
  const buf = Buffer.alloc(8 + bits.length)
  buf.write('MSK1', 0, 'ascii')
  buf.writeUInt16LE(h, 4)
  buf.writeUInt16LE(w, 6)
  for (let i = 0; i < bits.length; i++) buf[8 + i] = bits[i] ? 1 : 0
  return buf
}

export function decodeMask(buf: Buffer): MaskGrid {
  if (buf.length < 4 || buf.toString('ascii', 0, 4) !== 'MSK1') {
    throw new Error('not a mask (bad magic)')
  }
  if (buf.length < 8) throw new Error('mask header truncated')
  const h = buf.readUInt16LE(4)
  const w = buf.readUInt16LE(6)
  if (buf.length < 8 + h * w) throw new Error('mask payload truncated')
  const bits = new Uint8Array(h * w)
  for (let i = 0; i < h * w; i++) bits[i] = buf[8 + i] ? 1 : 0
  return { height: h, width: w, bits }
}

export async function writeAtomic(dest: string, payload: Buffer): Promise<void> {
  const dir = path.dirname(dest)
  const tmp = path.join(dir, `.${path.basename(dest)}.${process.pid}.tmp`)
  await fs.writeFile(tmp, payload)
  await fs.rename(tmp, dest)
}
