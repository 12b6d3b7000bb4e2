import * as fs from 'node:fs'
import * as os from 'node:os'
import * as path from 'node:path'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { buildCharts, renderSvg, signalGroupOrder } from '../src/charts.js'
import { num, parseCsv } from '../src/csv.js'
import { renderPng } from '../src/png.js'
import { generateReport } from '../src/report.js'
import { makeDelayTable, makeMlrTable } from '../src/tables.js'

const HERE = path.dirname(new URL(import.meta.url).pathname)
const FIXTURES = path.join(HERE, 'fixtures')
const GOLDEN = path.join(HERE, 'golden')

const summary = parseCsv(fs.readFileSync(path.join(FIXTURES, 'summary.csv'), 'utf-8'))
const sgDelays = parseCsv(fs.readFileSync(path.join(FIXTURES, 'sg_delays.csv'), 'utf-8'))
const sgEvents = parseCsv(fs.readFileSync(path.join(FIXTURES, 'sg_events.csv'), 'utf-8'))

let outDir: string

beforeAll(() => {
  outDir = fs.mkdtempSync(path.join(os.tmpdir(), 'report-'))
})

afterAll(() => {
  fs.rmSync(outDir, { recursive: true, force: true })
})

describe('csv parsing', () => {
  it('parses rows into records', () => {
    expect(summary.length).toBe(15)
    expect(summary[0].condition).toBe('baseline')
  })
  it('numeric cells convert, blanks become null', () => {
    expect(num('0.203')).toBeCloseTo(0.203)
    expect(num('')).toBeNull()
    expect(() => num('abc')).toThrow()
  })
})

describe('tables', () => {
  it('mlr table matches the golden file byte-for-byte', () => {
    const got = makeMlrTable(summary, 'markdown')
    const want = fs.readFileSync(path.join(GOLDEN, 'mlr_table.md'), 'utf-8')
    expect(got).toBe(want)
  })

  it('delay table matches the golden file byte-for-byte', () => {
    const got = makeDelayTable(summary, 'markdown')
    const want = fs.readFileSync(path.join(GOLDEN, 'delay_table.md'), 'utf-8')
    expect(got).toBe(want)
  })

  it('formats cells as mean (sd)', () => {
    const table = makeDelayTable(summary, 'markdown')
    expect(table).toContain('49.52 (4.35)*')
    expect(table).toContain('40.58 (1.87)')
  })

  it('stars appear exactly where p < 0.05', () => {
    const starred = summary
      .filter((row) => {
        const p = num(row.delay_p_value)
        return p !== null && p < 0.05
      })
      .map((row) => row.condition)
    expect(starred).toEqual(['homogeneous-30db-uncorrected',
      'heterogeneous-30db-uncorrected', 'heterogeneous-30db-corrected'])
    const table = makeDelayTable(summary, 'markdown')
    const starCells = table.split('\n')
      .filter((line) => line.startsWith('|'))
      .flatMap((line) => line.split('|'))
      .map((cell) => cell.trim())
      .filter((cell) => cell.endsWith('*'))
    expect(starCells.sort()).toEqual(['43.64 (2.76)*', '48.98 (5.13)*',
      '49.52 (4.35)*'])
  })

  it('baseline row keeps its loss cells blank', () => {
    const line = makeMlrTable(summary, 'markdown').split('\n')
      .find((l) => l.includes('baseline'))!
    const cells = line.split('|').map((c) => c.trim()).slice(1, -1)
    expect(cells[0]).toBe('baseline')
    expect(cells.slice(1)).toEqual(['', '', '', '', '', '', ''])
  })

  it('csv table format renders too', () => {
    const table = makeMlrTable(summary, 'csv')
    expect(table.split('\n')[0]).toContain('Condition,SNR penalty (dB),All')
  })

  it('missing columns are an error', () => {
    expect(() => makeMlrTable([{ condition: 'x' }] as never)).toThrow(/missing column/)
  })
})

describe('charts', () => {
  it('builds the four panels over the 30 dB conditions', () => {
    const charts = buildCharts(sgDelays, sgEvents)
    expect(charts.length).toBe(4)
    for (const chart of charts) {
      expect(chart.groups.length).toBe(8)
      expect(chart.series.length).toBe(4)
    }
    // heterogeneous-uncorrected west starvation shows up in panel (a)
    const west = charts[0].groups.indexOf('west_tr')
    expect(charts[0].series[2].values[west]).toBeCloseTo(92.4)
  })

  it('group axis order matches the controller order in the csv', () => {
    expect(signalGroupOrder(sgDelays)).toEqual(['north_tr', 'north_l',
      'south_tr', 'south_l', 'east_tr', 'east_l', 'west_tr', 'west_l'])
    const svg = renderSvg(buildCharts(sgDelays, sgEvents)[0])
    const labels = [...svg.matchAll(/>([a-z]+_(?:tr|l))</g)].map((m) => m[1])
    expect(labels).toEqual(signalGroupOrder(sgDelays))
  })

  it('svg output is deterministic and well-formed', () => {
    const chart = buildCharts(sgDelays, sgEvents)[1]
    const a = renderSvg(chart)
    const b = renderSvg(chart)
    expect(a).toBe(b)
    expect(a.startsWith('<svg ')).toBe(true)
    expect(a.trimEnd().endsWith('</svg>')).toBe(true)
    const bars = (a.match(/<rect /g) ?? []).length
    expect(bars).toBeGreaterThanOrEqual(8 * 4)  // a bar per group and series
    expect(a).not.toMatch(/\d{4}-\d{2}-\d{2}/)  // no dates embedded
  })

  it('an all-zero panel still renders', () => {
    const zeroEvents = sgEvents.map((row) => ({ ...row, late_minus_early: '0' }))
    const svg = renderSvg(buildCharts(sgDelays, zeroEvents)[1])
    expect(svg).toContain('</svg>')
  })

  it('missing condition data skips the bar group with a warning', () => {
    const onlyHom = sgDelays.filter((r) => !r.condition.startsWith('heterogeneous'))
    const warnings: string[] = []
    const charts = buildCharts(onlyHom, sgEvents, (m) => warnings.push(m))
    expect(charts[0].series.length).toBe(2)
    expect(warnings.some((m) => m.includes('heterogeneous-30db-uncorrected'))).toBe(true)
  })

  it('png output has a valid signature and fixed dimensions', () => {
    const chart = buildCharts(sgDelays, sgEvents)[3]
    const png = renderPng(chart)
    expect([...png.subarray(0, 8)]).toEqual([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])
    expect(png.readUInt32BE(16)).toBe(880)
    expect(png.readUInt32BE(20)).toBe(480)
    expect(renderPng(chart).equals(png)).toBe(true)
  })
})

describe('report generation', () => {
  it('writes tables and all four figures, leaving inputs untouched', () => {
    const before = ['summary.csv', 'sg_delays.csv', 'sg_events.csv']
      .map((name) => fs.readFileSync(path.join(FIXTURES, name)))
    const written = generateReport({
      inDir: FIXTURES,
      outDir: path.join(outDir, 'svg'),
      figureFormat: 'svg',
      tableFormat: 'markdown',
      warn: () => {},
    })
    expect(written.map((f) => path.basename(f))).toEqual([
      'mlr_table.md', 'delay_table.md', 'fig_delay_change.svg',
      'fig_late_minus_early.svg', 'fig_green_time_loss.svg',
      'fig_delayed_vehicles.svg'])
    for (const file of written) expect(fs.existsSync(file)).toBe(true)
    const after = ['summary.csv', 'sg_delays.csv', 'sg_events.csv']
      .map((name) => fs.readFileSync(path.join(FIXTURES, name)))
    before.forEach((buf, i) => expect(after[i].equals(buf)).toBe(true))
  })

  it('png format renders all four figures', () => {
    const written = generateReport({
      inDir: FIXTURES,
      outDir: path.join(outDir, 'png'),
      figureFormat: 'png',
      tableFormat: 'csv',
      warn: () => {},
    })
    const figures = written.filter((f) => f.endsWith('.png'))
    expect(figures.length).toBe(4)
    for (const file of figures) {
      expect(fs.statSync(file).size).toBeGreaterThan(1000)
    }
  })

  it('missing inputs are reported as errors', () => {
    expect(() => generateReport({
      inDir: path.join(outDir, 'nowhere'),
      outDir: path.join(outDir, 'x'),
      figureFormat: 'svg',
      tableFormat: 'markdown',
    })).toThrow(/missing input file/)
  })
})
