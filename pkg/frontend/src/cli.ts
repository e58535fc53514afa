#!/usr/bin/env node
/**
 * meshpose-extract: turn images into meshpose .fmap/.msk inputs.
 *
 *   extract --images DIR --out DIR --stride N [--channels N]
 *           [--with-diffusion] [--masks] [--model DIR]
 *
 * Exit codes: 0 success, 1 usage error, 2 job error.
 */

import { runJob } from './extract.js'

interface Flags {
  [key: string]: string | boolean
}

function parseArgs(argv: string[]): { command: string; flags: Flags } {
  const [command, ...rest] = argv
  const flags: Flags = {}
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i]
    if (!arg.startsWith('--')) throw new Error(`unexpected argument ${arg}`)
    const eq = arg.indexOf('=')
    if (eq >= 0) {
      flags[arg.slice(2, eq)] = arg.slice(eq + 1)
    } else if (i + 1 < rest.length && !rest[i + 1].startsWith('--')) {
      flags[arg.slice(2)] = rest[++i]
    } else {
      flags[arg.slice(2)] = true
    }
  }
  return { command: command ?? '', flags }
}

function usage(): void {
  process.stderr.write(
    'usage: meshpose-extract extract --images DIR --out DIR [--stride N]\n' +
    '         [--channels N] [--with-diffusion] [--masks] [--model DIR]\n',
  )
}

export async function main(argv: string[]): Promise<number> {
  let parsed
  try {
    parsed = parseArgs(argv)
  } catch (e) {
    process.stderr.write(`${(e as Error).message}\n`)
    usage()
    return 1
  }
  const { command, flags } = parsed
  if (command !== 'extract' || flags.help) {
    usage()
    return command === '' || command === 'extract' ? 1 : 1
  }
  const images = flags.images
  const out = flags.out
  if (typeof images !== 'string' || typeof out !== 'string') {
    process.stderr.write('extract needs --images and --out directories\n')
    usage()
    return 1
  }
  const stride = parseInt(String(flags.stride ?? '14'), 10)
  const channels = parseInt(String(flags.channels ?? '64'), 10)
  if (!(stride > 0) || !(channels > 0)) {
    process.stderr.write('--stride and --channels must be positive integers\n')
    return 1
  }
  try {
    const results = await runJob(
      {
        imagesDir: images,
        outDir: out,
        stride,
        channels,
        withDiffusion: Boolean(flags['with-diffusion']),
        masks: Boolean(flags.masks),
        modelDir: typeof flags.model === 'string' ? flags.model : undefined,
      },
      line => process.stderr.write(line + '\n'),
    )
    const failed = results.filter(r => !r.ok)
    for (const r of results) {
      if (r.ok) {
        process.stdout.write(
          `${r.image} ${r.gridHeight}x${r.gridWidth}x${r.channels}\n`,
        )
      }
    }
    if (failed.length === results.length) {
      process.stderr.write('every file failed\n')
      return 2
    }
    return 0
  } catch (e) {
    process.stderr.write(`error: ${(e as Error).message}\n`)
    return 2
  }
}

main(process.argv.slice(2)).then(code => {
  process.exitCode = code
})
