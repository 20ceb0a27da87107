import { ResultRow } from './csv.js'
import { movingAverage } from './smoothing.js'

export type GroupKey = 'env' | 'k' | 'metric' | 'seed'

export interface Curve {
  label: string
  trials: number[]
  mean: number[]
  min: number[]
  max: number[]
  seeds: number
}

/** Split rows by the group-by keys, smooth each seed's steps-to-goal series,
 *  then aggregate mean/min/max across seeds per trial. */
export function buildCurves(rows: ResultRow[], groupBy: GroupKey[], window: number): Curve[] {
  if (rows.length === 0) throw new Error('no data rows to plot')
  const groups = new Map<string, ResultRow[]>()
  for (const row of rows) {
    const label = groupBy.length > 0 ? groupBy.map((key) => `${key}=${row[key]}`).join(',') : 'all'
    const bucket = groups.get(label)
    if (bucket) bucket.push(row)
    else groups.set(label, [row])
  }

  const curves: Curve[] = []
  for (const [label, bucket] of [...groups.entries()].sort((a, b) => a[0].localeCompare(b[0]))) {
    const bySeed = new Map<number, ResultRow[]>()
    for (const row of bucket) {
      const seedRows = bySeed.get(row.seed)
      if (seedRows) seedRows.push(row)
      else bySeed.set(row.seed, [row])
    }
    const smoothedBySeed = new Map<number, Map<number, number>>()
    const trialSet = new Set<number>()
    for (const [seed, seedRows] of bySeed) {
      seedRows.sort((a, b) => a.trial - b.trial)
      const smoothed = movingAverage(seedRows.map((r) => r.steps_to_goal), window)
      const byTrial = new Map<number, number>()
      seedRows.forEach((r, i) => {
        byTrial.set(r.trial, smoothed[i])
        trialSet.add(r.trial)
      })
      smoothedBySeed.set(seed, byTrial)
    }
    const trials = [...trialSet].sort((a, b) => a - b)
    const mean: number[] = []
    const min: number[] = []
    const max: number[] = []
    for (const trial of trials) {
      const values: number[] = []
      for (const byTrial of smoothedBySeed.values()) {
        const v = byTrial.get(trial)
        if (v !== undefined) values.push(v)
      }
      mean.push(values.reduce((a, b) => a + b, 0) / values.length)
      min.push(Math.min(...values))
      max.push(Math.max(...values))
    }
    curves.push({ label, trials, mean, min, max, seeds: bySeed.size })
  }
  return curves
}
