#!/usr/bin/env node
/**
 * report --in DIR --out DIR [--format svg|png] [--tables markdown|csv]
 */

import { generateReport } from './report.js'

function usage(): never {
  console.error('usage: crossflux-report --in DIR --out DIR '
    + '[--format svg|png] [--tables markdown|csv]')
  process.exit(2)
}

export function main(argv: string[]): number {
  let inDir = ''
  let outDir = ''
  let figureFormat: 'svg' | 'png' = 'svg'
  let tableFormat: 'markdown' | 'csv' = 'markdown'
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i]
    const next = () => {
      i += 1
      if (i >= argv.length) usage()
      return argv[i]
    }
    if (arg === '--in') inDir = next()
    else if (arg === '--out') outDir = next()
    else if (arg === '--format') {
      const v = next()
      if (v !== 'svg' && v !== 'png') usage()
      figureFormat = v
    } else if (arg === '--tables') {
      const v = next()
      if (v !== 'markdown' && v !== 'csv') usage()
      tableFormat = v
    } else usage()
  }
  if (!inDir || !outDir) usage()
  try {
    const written = generateReport({ inDir, outDir, figureFormat, tableFormat })
    for (const file of written) console.log(file)
    return 0
  } catch (error) {
    console.error(String(error instanceof Error ? error.message : error))
    return 1
  }
}

process.exit(main(process.argv.slice(2)))
