/**
 * Self-contained PNG rendering of the bar charts: an RGB raster with a
 * 5x7 bitmap font, deflate-compressed into a PNG by hand.  No canvas
 * dependency, fully deterministic output.
 */

import * as zlib from 'node:zlib'

import { BarChart, CHART_HEIGHT, CHART_WIDTH, SERIES_COLORS, yScale } from './charts.js'

// row-wise 5-bit glyph masks, top to bottom
const FONT: Record<string, number[]> = {
  A: [0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11],
  B: [0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e],
  C: [0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e],
  D: [0x1e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1e],
  E: [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f],
  F: [0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10],
  G: [0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0e],
  H: [0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11],
  I: [0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e],
  J: [0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c],
  K: [0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11],
  L: [0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f],
  M: [0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11],
  N: [0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11],
  O: [0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e],
  P: [0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10],
  Q: [0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d],
  R: [0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11],
  S: [0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e],
  T: [0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04],
  U: [0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e],
  V: [0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04],
  W: [0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11],
  X: [0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11],
  Y: [0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04],
  Z: [0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f],
  '0': [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
  '1': [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
  '2': [0x0e, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1f],
  '3': [0x0e, 0x11, 0x01, 0x06, 0x01, 0x11, 0x0e],
  '4': [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
  '5': [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
  '6': [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
  '7': [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
  '8': [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
  '9': [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
  '-': [0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00],
  _: [0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f],
  '(': [0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02],
  ')': [0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08],
  '%': [0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03],
  '.': [0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c],
  ',': [0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08],
  ':': [0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00],
  '/': [0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10],
  '+': [0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00],
  '*': [0x00, 0x0a, 0x04, 0x1f, 0x04, 0x0a, 0x00],
  ' ': [0, 0, 0, 0, 0, 0, 0],
}

type Color = [number, number, number]

function parseColor(hex: string): Color {
  return [parseInt(hex.slice(1, 3), 16), parseInt(hex.slice(3, 5), 16),
    parseInt(hex.slice(5, 7), 16)]
}

class Raster {
  readonly data: Uint8Array

  constructor(readonly width: number, readonly height: number) {
    this.data = new Uint8Array(width * height * 3).fill(255)
  }

  fillRect(x: number, y: number, w: number, h: number, color: Color): void {
    const x0 = Math.max(0, Math.round(x))
    const y0 = Math.max(0, Math.round(y))
    const x1 = Math.min(this.width, Math.round(x + w))
    const y1 = Math.min(this.height, Math.round(y + h))
    for (let yy = y0; yy < y1; yy++) {
      for (let xx = x0; xx < x1; xx++) {
        const i = (yy * this.width + xx) * 3
        this.data[i] = color[0]
        this.data[i + 1] = color[1]
        this.data[i + 2] = color[2]
      }
    }
  }

  text(x: number, y: number, message: string, color: Color): void {
    let cx = Math.round(x)
    const cy = Math.round(y)
    for (const raw of message) {
      const glyph = FONT[raw.toUpperCase()] ?? FONT[' ']
      for (let row = 0; row < 7; row++) {
        for (let col = 0; col < 5; col++) {
          if (glyph[row] & (1 << (4 - col))) {
            this.fillRect(cx + col, cy + row, 1, 1, color)
          }
        }
      }
      cx += 6
    }
  }

  textRight(x: number, y: number, message: string, color: Color): void {
    this.text(x - message.length * 6, y, message, color)
  }

  textCenter(x: number, y: number, message: string, color: Color): void {
    this.text(x - (message.length * 6) / 2, y, message, color)
  }
}

const CRC_TABLE = (() => {
  const table = new Uint32Array(256)
  for (let n = 0; n < 256; n++) {
    let c = n
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1
    }
    table[n] = c >>> 0
  }
  return table
})()

function crc32(buffer: Uint8Array): number {
  let c = 0xffffffff
  for (const byte of buffer) {
    c = CRC_TABLE[(c ^ byte) & 0xff] ^ (c >>> 8)
  }
  return (c ^ 0xffffffff) >>> 0
}

function chunk(kind: string, payload: Uint8Array): Buffer {
  const head = Buffer.alloc(8)
  head.writeUInt32BE(payload.length, 0)
  head.write(kind, 4, 'ascii')
  const body = Buffer.concat([Buffer.from(kind, 'ascii'), Buffer.from(payload)])
  const tail = Buffer.alloc(4)
  tail.writeUInt32BE(crc32(body), 0)
  return Buffer.concat([head, Buffer.from(payload), tail])
}

export function encodePng(raster: Raster): Buffer {
  const { width, height, data } = raster
  const ihdr = Buffer.alloc(13)
  ihdr.writeUInt32BE(width, 0)
  ihdr.writeUInt32BE(height, 4)
  ihdr[8] = 8   // bit depth
  ihdr[9] = 2   // color type: truecolor
  const raw = Buffer.alloc(height * (width * 3 + 1))
  for (let y = 0; y < height; y++) {
    raw[y * (width * 3 + 1)] = 0  // filter: none
    raw.set(data.subarray(y * width * 3, (y + 1) * width * 3),
      y * (width * 3 + 1) + 1)
  }
  const idat = zlib.deflateSync(raw, { level: 9 })
  const header = Buffer.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a])
  return Buffer.concat([header, chunk('IHDR', ihdr), chunk('IDAT', idat),
    chunk('IEND', new Uint8Array(0))])
}

const BLACK: Color = [20, 20, 20]
const GREY: Color = [221, 221, 221]

const MARGIN = { top: 48, right: 20, bottom: 64, left: 72 }

export function renderPng(chart: BarChart): Buffer {
  const raster = new Raster(CHART_WIDTH, CHART_HEIGHT)
  const plotW = CHART_WIDTH - MARGIN.left - MARGIN.right
  const plotH = CHART_HEIGHT - MARGIN.top - MARGIN.bottom
  const scale = yScale(chart.series.flatMap((s) => s.values), plotH, MARGIN.top)

  raster.textCenter(CHART_WIDTH / 2, 14, chart.title, BLACK)
  raster.text(8, 26, chart.yLabel, BLACK)
  for (const tick of scale.ticks) {
    const y = scale.toPixel(tick)
    raster.fillRect(MARGIN.left, y, plotW, 1, GREY)
    raster.textRight(MARGIN.left - 6, y - 3,
      Number.isInteger(tick) ? String(tick) : String(Number(tick.toFixed(6))), BLACK)
  }
  raster.fillRect(MARGIN.left, scale.toPixel(0), plotW, 1, BLACK)

  const nGroups = Math.max(chart.groups.length, 1)
  const groupW = plotW / nGroups
  const nSeries = Math.max(chart.series.length, 1)
  const barW = (groupW * 0.8) / nSeries
  chart.groups.forEach((group, gi) => {
    const x0 = MARGIN.left + gi * groupW + groupW * 0.1
    chart.series.forEach((series, si) => {
      const value = series.values[gi]
      if (value === null) return
      const y = scale.toPixel(value)
      const y0 = scale.toPixel(0)
      raster.fillRect(x0 + si * barW, Math.min(y, y0), barW, Math.abs(y - y0),
        parseColor(SERIES_COLORS[si % SERIES_COLORS.length]))
    })
    raster.textCenter(MARGIN.left + gi * groupW + groupW / 2,
      MARGIN.top + plotH + 10, group, BLACK)
  })
  chart.series.forEach((series, si) => {
    const lx = MARGIN.left + 8 + si * 205
    const ly = CHART_HEIGHT - 22
    raster.fillRect(lx, ly, 10, 10, parseColor(SERIES_COLORS[si % SERIES_COLORS.length]))
    raster.text(lx + 14, ly + 1, series.name, BLACK)
  })
  return encodePng(raster)
}
