/**
 * Report generation: read the experiment's aggregated CSVs, write the two
 * summary tables and the four per-group bar charts.  Inputs are never
 * modified; outputs are reproducible byte-for-byte.
 */

import * as fs from 'node:fs'
import * as path from 'node:path'

import { buildCharts, renderSvg } from './charts.js'
import { parseCsv } from './csv.js'
import { renderPng } from './png.js'
import { makeDelayTable, makeMlrTable } from './tables.js'

export interface ReportOptions {
  inDir: string
  outDir: string
  figureFormat: 'svg' | 'png'
  tableFormat: 'markdown' | 'csv'
  warn?: (message: string) => void
}

const CHART_FILES = ['delay_change', 'late_minus_early', 'green_time_loss',
  'delayed_vehicles']

function readCsv(dir: string, name: string) {
  const file = path.join(dir, name)
  if (!fs.existsSync(file)) throw new Error(`missing input file: ${file}`)
  return parseCsv(fs.readFileSync(file, 'utf-8'))
}

export function generateReport(options: ReportOptions): string[] {
  const warn = options.warn ?? ((message: string) => console.warn(message))
  const summary = readCsv(options.inDir, 'summary.csv')
  const sgDelays = readCsv(options.inDir, 'sg_delays.csv')
  const sgEvents = readCsv(options.inDir, 'sg_events.csv')

  fs.mkdirSync(options.outDir, { recursive: true })
  const written: string[] = []
  const tableExt = options.tableFormat === 'markdown' ? 'md' : 'csv'

  const mlrPath = path.join(options.outDir, `mlr_table.${tableExt}`)
  fs.writeFileSync(mlrPath, makeMlrTable(summary, options.tableFormat))
  written.push(mlrPath)

  const delayPath = path.join(options.outDir, `delay_table.${tableExt}`)
  fs.writeFileSync(delayPath, makeDelayTable(summary, options.tableFormat))
  written.push(delayPath)

  const charts = buildCharts(sgDelays, sgEvents, warn)
  charts.forEach((chart, i) => {
    const file = path.join(options.outDir,
      `fig_${CHART_FILES[i]}.${options.figureFormat}`)
    if (options.figureFormat === 'svg') {
      fs.writeFileSync(file, renderSvg(chart))
    } else {
      fs.writeFileSync(file, renderPng(chart))
    }
    written.push(file)
  })
  return written
}
