/**
 * Grouped bar charts over the 30 dB conditions, one panel each for the
 * per-group delay change, late-minus-early green provision, green time loss,
 * and stranded vehicles.  The SVG output is deterministic text: fixed sizes,
 * fixed fonts, no timestamps.
 */

import { Row, num, requireColumns } from './csv.js'

export interface Series {
  name: string
  values: (number | null)[]
}

export interface BarChart {
  title: string
  yLabel: string
  groups: string[]
  series: Series[]
}

export const CHART_WIDTH = 880
export const CHART_HEIGHT = 480
const MARGIN = { top: 48, right: 20, bottom: 64, left: 72 }
export const SERIES_COLORS = ['#4477aa', '#66ccee', '#ee6677', '#ffa255']

const PANEL_CONDITIONS = [
  { label: 'homogeneous-30db-uncorrected', name: 'homogeneous, uncorrected' },
  { label: 'homogeneous-30db-corrected', name: 'homogeneous, corrected' },
  { label: 'heterogeneous-30db-uncorrected', name: 'heterogeneous, uncorrected' },
  { label: 'heterogeneous-30db-corrected', name: 'heterogeneous, corrected' },
]

export function signalGroupOrder(rows: Row[]): string[] {
  // first appearance order in the CSV matches the controller's group order
  const seen: string[] = []
  for (const row of rows) {
    if (!seen.includes(row.signal_group)) seen.push(row.signal_group)
  }
  return seen
}

function seriesFor(rows: Row[], groups: string[], column: string,
  missing: (label: string) => void): Series[] {
  const out: Series[] = []
  for (const cond of PANEL_CONDITIONS) {
    const byGroup = new Map<string, number | null>()
    for (const row of rows) {
      if (row.condition === cond.label) byGroup.set(row.signal_group, num(row[column]))
    }
    if (byGroup.size === 0) {
      missing(cond.label)
      continue
    }
    out.push({ name: cond.name, values: groups.map((g) => byGroup.get(g) ?? null) })
  }
  return out
}

/** The four panels; conditions without data are skipped with a warning. */
export function buildCharts(sgDelays: Row[], sgEvents: Row[],
  warn: (message: string) => void = () => {}): BarChart[] {
  requireColumns(sgDelays, ['condition', 'signal_group', 'delta_pct'], 'sg_delays.csv')
  requireColumns(sgEvents, ['condition', 'signal_group', 'late_minus_early',
    'green_loss_s', 'delayed_vehicles'], 'sg_events.csv')
  const groups = signalGroupOrder(sgDelays)
  const make = (title: string, yLabel: string, rows: Row[], column: string): BarChart => ({
    title,
    yLabel,
    groups,
    series: seriesFor(rows, groups, column,
      (label) => warn(`${title}: no data for ${label}, bar group skipped`)),
  })
  return [
    make('Change in average delay vs baseline', 'delay change (%)',
      sgDelays, 'delta_pct'),
    make('Late minus early green provision events', 'late - early (count)',
      sgEvents, 'late_minus_early'),
    make('Green time loss', 'green time lost (s)', sgEvents, 'green_loss_s'),
    make('Vehicles delayed by wrongful terminations', 'delayed vehicles (count)',
      sgEvents, 'delayed_vehicles'),
  ]
}

// --- scales -----------------------------------------------------------------

export interface YScale {
  lo: number
  hi: number
  ticks: number[]
  toPixel: (value: number) => number
}

export function yScale(charts: (number | null)[], heightPx: number, topPx: number): YScale {
  const values = charts.filter((v): v is number => v !== null)
  let lo = Math.min(0, ...values)
  let hi = Math.max(0, ...values)
  if (lo === hi) hi = lo + 1
  const span = hi - lo
  const rawStep = span / 5
  const power = Math.pow(10, Math.floor(Math.log10(rawStep)))
  const step = [1, 2, 5, 10].map((m) => m * power).find((s) => span / s <= 6) ?? 10 * power
  lo = Math.floor(lo / step) * step
  hi = Math.ceil(hi / step) * step
  const ticks: number[] = []
  for (let v = lo; v <= hi + step / 2; v += step) ticks.push(Number(v.toFixed(10)))
  return {
    lo,
    hi,
    ticks,
    toPixel: (value: number) => topPx + ((hi - value) / (hi - lo)) * heightPx,
  }
}

// --- SVG rendering ------------------------------------------------------------

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
}

function fmtTick(value: number): string {
  return Number.isInteger(value) ? String(value) : String(Number(value.toFixed(6)))
}

export function renderSvg(chart: BarChart): string {
  const plotW = CHART_WIDTH - MARGIN.left - MARGIN.right
  const plotH = CHART_HEIGHT - MARGIN.top - MARGIN.bottom
  const all = chart.series.flatMap((s) => s.values)
  const scale = yScale(all, plotH, MARGIN.top)
  const nGroups = chart.groups.length
  const groupW = plotW / Math.max(nGroups, 1)
  const nSeries = Math.max(chart.series.length, 1)
  const barW = (groupW * 0.8) / nSeries

  const parts: string[] = []
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${CHART_WIDTH}" height="${CHART_HEIGHT}" viewBox="0 0 ${CHART_WIDTH} ${CHART_HEIGHT}" font-family="monospace">`)
  parts.push(`<rect width="${CHART_WIDTH}" height="${CHART_HEIGHT}" fill="white"/>`)
  parts.push(`<text x="${CHART_WIDTH / 2}" y="22" text-anchor="middle" font-size="15">${esc(chart.title)}</text>`)
  parts.push(`<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${esc(chart.yLabel)}</text>`)

  for (const tick of scale.ticks) {
    const y = scale.toPixel(tick).toFixed(2)
    parts.push(`<line x1="${MARGIN.left}" y1="${y}" x2="${CHART_WIDTH - MARGIN.right}" y2="${y}" stroke="#dddddd"/>`)
    parts.push(`<text x="${MARGIN.left - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" font-size="11">${fmtTick(tick)}</text>`)
  }
  const zeroY = scale.toPixel(0).toFixed(2)
  parts.push(`<line x1="${MARGIN.left}" y1="${zeroY}" x2="${CHART_WIDTH - MARGIN.right}" y2="${zeroY}" stroke="#333333"/>`)

  chart.groups.forEach((group, gi) => {
    const x0 = MARGIN.left + gi * groupW + groupW * 0.1
    chart.series.forEach((series, si) => {
      const value = series.values[gi]
      if (value === null) return
      const x = x0 + si * barW
      const yv = scale.toPixel(value)
      const y0 = scale.toPixel(0)
      const top = Math.min(yv, y0)
      const height = Math.abs(yv - y0)
      parts.push(`<rect x="${x.toFixed(2)}" y="${top.toFixed(2)}" width="${barW.toFixed(2)}" height="${height.toFixed(2)}" fill="${SERIES_COLORS[si % SERIES_COLORS.length]}"/>`)
    })
    const cx = (MARGIN.left + gi * groupW + groupW / 2).toFixed(2)
    parts.push(`<text x="${cx}" y="${MARGIN.top + plotH + 18}" text-anchor="middle" font-size="11">${esc(group)}</text>`)
  })

  chart.series.forEach((series, si) => {
    const lx = MARGIN.left + 8 + si * 205
    const ly = CHART_HEIGHT - 14
    parts.push(`<rect x="${lx}" y="${ly - 10}" width="12" height="12" fill="${SERIES_COLORS[si % SERIES_COLORS.length]}"/>`)
    parts.push(`<text x="${lx + 17}" y="${ly}" font-size="10">${esc(series.name)}</text>`)
  })
  parts.push('</svg>')
  return parts.join('\n') + '\n'
}
