export { encodeFeatureMap, decodeFeatureMap, encodeMask, decodeMask, writeAtomic } from './format.js'
export type { FeatureGrid, MaskGrid } from './format.js'
export { extractFeatures, gridSize } from './descriptor.js'
export type { DescriptorOptions } from './descriptor.js'
export { extractMask, pixelMask, poolMask } from './segment.js'
export { extractWithModel } from './model.js'
export { runJob, listImages } from './extract.js'
export type { ExtractionJob, FileResult } from './extract.js'
export { loadPng, savePng } from './image.js'
export type { RgbImage } from './image.js'
