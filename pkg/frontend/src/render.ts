import { Curve } from './grouping.js'
import { GLYPH_ADVANCE, GLYPH_HEIGHT, GLYPH_WIDTH, glyphFor, textWidth } from './font.js'
import { encodePng } from './png.js'

export type Rgb = [number, number, number]

const PALETTE: Rgb[] = [
  [31, 119, 180],
  [255, 127, 14],
  [44, 160, 44],
  [214, 39, 40],
  [148, 103, 189],
  [140, 86, 75],
]

const WIDTH = 800
const HEIGHT = 500
const MARGIN = { left: 70, right: 20, top: 20, bottom: 50 }

class Raster {
  data: Uint8Array

  constructor(readonly width: number, readonly height: number) {
    this.data = new Uint8Array(width * height * 4).fill(255)
  }

  set(x: number, y: number, [r, g, b]: Rgb, alpha = 1) {
    if (x < 0 || y < 0 || x >= this.width || y >= this.height) return
    const i = (y * this.width + x) * 4
    this.data[i] = Math.round(r * alpha + this.data[i] * (1 - alpha))
    this.data[i + 1] = Math.round(g * alpha + this.data[i + 1] * (1 - alpha))
    this.data[i + 2] = Math.round(b * alpha + this.data[i + 2] * (1 - alpha))
    this.data[i + 3] = 255
  }

  line(x0: number, y0: number, x1: number, y1: number, color: Rgb, thick = 1) {
    // Bresenham with optional thickening orthogonal to the dominant axis
    let [cx, cy] = [x0, y0]
    const dx = Math.abs(x1 - x0)
    const dy = -Math.abs(y1 - y0)
    const sx = x0 < x1 ? 1 : -1
    const sy = y0 < y1 ? 1 : -1
    let err = dx + dy
    const steep = dy < -dx
    for (;;) {
      for (let t = 0; t < thick; t++) {
        if (steep) this.set(cx + t, cy, color)
        else this.set(cx, cy + t, color)
      }
      if (cx === x1 && cy === y1) break
      const e2 = 2 * err
      if (e2 >= dy) {
        err += dy
        cx += sx
      }
      if (e2 <= dx) {
        err += dx
        cy += sy
      }
    }
  }

  text(x: number, y: number, message: string, color: Rgb) {
    let cursor = x
    for (const ch of message) {
      const rows = glyphFor(ch)
      for (let gy = 0; gy < GLYPH_HEIGHT; gy++) {
        for (let gx = 0; gx < GLYPH_WIDTH; gx++) {
          if ((rows[gy] >> (GLYPH_WIDTH - 1 - gx)) & 1) this.set(cursor + gx, y + gy, color)
        }
      }
      cursor += GLYPH_ADVANCE
    }
  }
}

function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) return [lo]
  const span = hi - lo
  const step = 10 ** Math.floor(Math.log10(span / count))
  const candidates = [step, 2 * step, 5 * step, 10 * step]
  const chosen = candidates.find((s) => span / s <= count + 1) ?? 10 * step
  const first = Math.ceil(lo / chosen) * chosen
  const ticks: number[] = []
  for (let v = first; v <= hi + 1e-9; v += chosen) ticks.push(Number(v.toFixed(10)))
  return ticks
}

function formatTick(v: number): string {
  return Number.isInteger(v) ? String(v) : String(Number(v.toPrecision(4)))
}

/** Render learning curves (mean line per group over a min-max band across
 *  seeds) into a PNG buffer.  Output bytes depend only on the curves. */
export function renderCurves(curves: Curve[], title = ''): Buffer {
  if (curves.length === 0) throw new Error('nothing to render')
  const raster = new Raster(WIDTH, HEIGHT)
  const xs = curves.flatMap((c) => c.trials)
  const ys = curves.flatMap((c) => [...c.min, ...c.max])
  const xLo = Math.min(...xs)
  const xHi = Math.max(...xs)
  const yLo = Math.min(0, ...ys)
  const yHi = Math.max(...ys) * 1.05 || 1

  const plotW = WIDTH - MARGIN.left - MARGIN.right
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom
  const toX = (v: number) => MARGIN.left + Math.round(((v - xLo) / Math.max(xHi - xLo, 1e-12)) * plotW)
  const toY = (v: number) => MARGIN.top + Math.round((1 - (v - yLo) / Math.max(yHi - yLo, 1e-12)) * plotH)

  const axisColor: Rgb = [40, 40, 40]
  const gridColor: Rgb = [220, 220, 220]

  for (const tick of niceTicks(yLo, yHi)) {
    const y = toY(tick)
    raster.line(MARGIN.left, y, WIDTH - MARGIN.right, y, gridColor)
    const label = formatTick(tick)
    raster.text(MARGIN.left - 8 - textWidth(label), y - 3, label, axisColor)
  }
  for (const tick of niceTicks(xLo, xHi, 8)) {
    const x = toX(tick)
    raster.line(x, MARGIN.top, x, HEIGHT - MARGIN.bottom, gridColor)
    const label = formatTick(tick)
    raster.text(x - Math.floor(textWidth(label) / 2), HEIGHT - MARGIN.bottom + 8, label, axisColor)
  }
  raster.line(MARGIN.left, MARGIN.top, MARGIN.left, HEIGHT - MARGIN.bottom, axisColor)
  raster.line(MARGIN.left, HEIGHT - MARGIN.bottom, WIDTH - MARGIN.right, HEIGHT - MARGIN.bottom, axisColor)
  raster.text(MARGIN.left + Math.floor(plotW / 2) - 12, HEIGHT - 16, 'trial', axisColor)
  // y-axis label, one glyph per row to read downward
  'steps'.split('').forEach((ch, i) => raster.text(8, MARGIN.top + 40 + i * 9, ch, axisColor))
  if (title) raster.text(MARGIN.left + 4, 6, title, axisColor)

  curves.forEach((curve, idx) => {
    const color = PALETTE[idx % PALETTE.length]
    if (curve.seeds > 1) {
      for (let i = 0; i + 1 < curve.trials.length; i++) {
        const x0 = toX(curve.trials[i])
        const x1 = toX(curve.trials[i + 1])
        for (let x = x0; x <= x1; x++) {
          const f = x1 === x0 ? 0 : (x - x0) / (x1 - x0)
          const top = toY(curve.max[i] + f * (curve.max[i + 1] - curve.max[i]))
          const bot = toY(curve.min[i] + f * (curve.min[i + 1] - curve.min[i]))
          for (let y = top; y <= bot; y++) raster.set(x, y, color, 0.18)
        }
      }
    }
    for (let i = 0; i + 1 < curve.trials.length; i++) {
      raster.line(
        toX(curve.trials[i]),
        toY(curve.mean[i]),
        toX(curve.trials[i + 1]),
        toY(curve.mean[i + 1]),
        color,
        2,
      )
    }
    const legendY = MARGIN.top + 8 + idx * 14
    const legendX = WIDTH - MARGIN.right - 160
    raster.line(legendX, legendY + 3, legendX + 18, legendY + 3, color, 3)
    raster.text(legendX + 24, legendY, curve.label, axisColor)
  })

  return encodePng(WIDTH, HEIGHT, raster.data)
}
