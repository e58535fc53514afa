// Loose ambient typing so the optional TensorFlow.js integration compiles
// without the package installed; the real module is imported dynamically.
declare module '@tensorflow/tfjs' {
  export function loadGraphModel(handler: unknown): Promise<{
    execute(input: unknown): {
      shape: number[]
      data(): Promise<Float32Array>
      dispose(): void
    }
  }>
  export function tensor4d(values: Float32Array, shape: number[]): {
    dispose(): void
  }
}
