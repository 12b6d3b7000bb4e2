/**
 * Minimal CSV reading for the simulator's output files: header row,
 * comma-separated, LF line endings, no quoting (the writers never emit
 * commas inside cells).
 */

export type Row = Record<string, string>

export function parseCsv(text: string): Row[] {
  const lines = text.split('\n').filter((line) => line.length > 0)
  if (lines.length === 0) return []
  const header = lines[0].split(',')
  return lines.slice(1).map((line) => {
    const cells = line.split(',')
    const row: Row = {}
    header.forEach((name, i) => {
      row[name] = cells[i] ?? ''
    })
    return row
  })
}

/** Parse a numeric cell; empty cells become null. */
export function num(cell: string | undefined): number | null {
  if (cell === undefined || cell === '') return null
  const value = Number(cell)
  if (Number.isNaN(value)) throw new Error(`not a number: ${JSON.stringify(cell)}`)
  return value
}

export function requireColumns(rows: Row[], columns: string[], where: string): void {
  if (rows.length === 0) throw new Error(`${where}: no data rows`)
  for (const column of columns) {
    if (!(column in rows[0])) throw new Error(`${where}: missing column ${column}`)
  }
}
