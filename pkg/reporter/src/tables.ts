/**
 * Summary tables: message loss ratios per condition and approach scope, and
 * average delays with significance stars against the baseline (p < 0.05).
 */

import { Row, num, requireColumns } from './csv.js'

export const STAR_P = 0.05

const ENVIRONMENTS = ['homogeneous', 'heterogeneous'] as const
const PENALTIES = [0, 20, 25, 30] as const

interface ConditionRow {
  environment: string
  penalty: number
  correction: boolean
  row: Row
}

function conditionRows(summary: Row[]): ConditionRow[] {
  requireColumns(summary, ['condition', 'environment', 'snr_penalty_db',
    'correction', 'mlr_all_mean', 'delay_mean_s', 'delay_p_value'], 'summary.csv')
  return summary.map((row) => ({
    environment: row.environment,
    penalty: num(row.snr_penalty_db) ?? 0,
    correction: row.correction === 'True',
    row,
  }))
}

function pick(rows: ConditionRow[], environment: string, penalty: number,
  correction: boolean): Row | null {
  const hit = rows.find((r) => r.environment === environment
    && r.penalty === penalty && r.correction === correction)
  return hit ? hit.row : null
}

function fmtMeanSd(mean: number | null, sd: number | null,
  scale = 1, digits = 2, sdDigits = 2): string {
  if (mean === null) return ''
  const m = (mean * scale).toFixed(digits)
  if (sd === null) return m
  return `${m} (${(sd * scale).toFixed(sdDigits)})`
}

function mlrCell(row: Row | null, scope: 'all' | 'west' | 'others'): string {
  if (row === null) return ''
  return fmtMeanSd(num(row[`mlr_${scope}_mean`]), num(row[`mlr_${scope}_sd`]),
    100, 1, 2)
}

function delayCell(row: Row | null): string {
  if (row === null) return ''
  const base = fmtMeanSd(num(row.delay_mean_s), num(row.delay_sd_s))
  if (base === '') return ''
  const p = num(row.delay_p_value)
  return p !== null && p < STAR_P ? `${base}*` : base
}

function markdownTable(header: string[], rows: string[][]): string {
  const lines = [
    `| ${header.join(' | ')} |`,
    `| ${header.map(() => '---').join(' | ')} |`,
    ...rows.map((cells) => `| ${cells.join(' | ')} |`),
  ]
  return lines.join('\n') + '\n'
}

function csvTable(header: string[], rows: string[][]): string {
  return [header.join(','), ...rows.map((cells) => cells.join(','))].join('\n') + '\n'
}

function render(format: 'markdown' | 'csv', header: string[], rows: string[][],
  title: string): string {
  if (format === 'csv') return csvTable(header, rows)
  return `## ${title}\n\n` + markdownTable(header, rows)
}

/**
 * Loss-ratio table: one row per environment and penalty, scope columns for
 * the uncorrected and corrected variants.  The baseline row stays blank in
 * the loss columns: nothing is lost there.
 */
export function makeMlrTable(summary: Row[], format: 'markdown' | 'csv' = 'markdown'): string {
  const rows = conditionRows(summary)
  const header = ['Condition', 'SNR penalty (dB)',
    'All', 'West', 'Others',
    'All (corrected)', 'West (corrected)', 'Others (corrected)']
  const body: string[][] = []
  const baseline = rows.find((r) => r.environment === 'baseline')
  if (baseline) body.push(['baseline', '', '', '', '', '', '', ''])
  for (const environment of ENVIRONMENTS) {
    for (const penalty of PENALTIES) {
      const unc = pick(rows, environment, penalty, false)
      const corr = pick(rows, environment, penalty, true)
      if (unc === null && corr === null) continue
      body.push([environment, String(penalty),
        mlrCell(unc, 'all'), mlrCell(unc, 'west'), mlrCell(unc, 'others'),
        mlrCell(corr, 'all'), mlrCell(corr, 'west'), mlrCell(corr, 'others')])
    }
  }
  return render(format, header, body,
    'Message loss ratio (%), mean (sd) over replications')
}

/**
 * Delay table: mean (sd) seconds per condition, without and with the loss
 * correction; a star marks p < 0.05 against the baseline.
 */
export function makeDelayTable(summary: Row[], format: 'markdown' | 'csv' = 'markdown'): string {
  const rows = conditionRows(summary)
  const header = ['Condition', 'SNR penalty (dB)',
    'Delay (s), uncorrected', 'Delay (s), corrected']
  const body: string[][] = []
  const baseline = rows.find((r) => r.environment === 'baseline')
  if (baseline) body.push(['baseline', '', delayCell(baseline.row), ''])
  for (const environment of ENVIRONMENTS) {
    for (const penalty of PENALTIES) {
      const unc = pick(rows, environment, penalty, false)
      const corr = pick(rows, environment, penalty, true)
      if (unc === null && corr === null) continue
      body.push([environment, String(penalty), delayCell(unc), delayCell(corr)])
    }
  }
  return render(format, header, body,
    'Average vehicle delay (s), mean (sd) over replications; * p < 0.05 vs baseline')
}
