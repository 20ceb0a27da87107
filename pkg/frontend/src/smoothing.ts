/** Trailing moving average; the first window-1 points average whatever prefix
 *  exists.  The window sum runs left to right so the result reproduces the
 *  experiment runner's smoothing column bit for bit. */
export function movingAverage(series: number[], window: number): number[] {
  if (window < 1 || !Number.isInteger(window)) {
    throw new Error(`window must be a positive integer, got ${window}`)
  }
  const out = new Array<number>(series.length)
  for (let i = 0; i < series.length; i++) {
    const lo = Math.max(0, i - window + 1)
    let acc = 0
    for (let j = lo; j <= i; j++) acc += series[j]
    out[i] = acc / (i - lo + 1)
  }
  return out
}
