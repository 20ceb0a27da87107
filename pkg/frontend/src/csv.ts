import { readFileSync } from 'fs'
import Papa from 'papaparse'

export const EXPECTED_COLUMNS = [
  'env',
  'k',
  'metric',
  'seed',
  'trial',
  'steps_to_goal',
  'steps_to_goal_ma10',
  'final_loss',
  'wall_time_ms',
] as const

export interface ResultRow {
  env: string
  k: number
  metric: string
  seed: number
  trial: number
  steps_to_goal: number
  steps_to_goal_ma10: number
  final_loss: number
  wall_time_ms: number
}

export class SchemaError extends Error {}

/** Parse one results.csv, rejecting files whose header deviates from the
 *  experiment-runner schema; the error message carries the column diff. */
export function readResultsCsv(path: string): ResultRow[] {
  const text = readFileSync(path, 'utf8')
  const parsed = Papa.parse<Record<string, string>>(text.trim(), { header: true, skipEmptyLines: true })
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message} (row ${parsed.errors[0].row})`)
  }
  const got = parsed.meta.fields ?? []
  const missing = EXPECTED_COLUMNS.filter((c) => !got.includes(c))
  const extra = got.filter((c) => !(EXPECTED_COLUMNS as readonly string[]).includes(c))
  if (missing.length > 0 || extra.length > 0) {
    throw new SchemaError(
      `${path}: column mismatch; missing [${missing.join(', ')}], unexpected [${extra.join(', ')}]`,
    )
  }
  return parsed.data.map((raw, i) => {
    const row: ResultRow = {
      env: raw.env,
      k: Number(raw.k),
      metric: raw.metric,
      seed: Number(raw.seed),
      trial: Number(raw.trial),
      steps_to_goal: Number(raw.steps_to_goal),
      steps_to_goal_ma10: Number(raw.steps_to_goal_ma10),
      final_loss: Number(raw.final_loss),
      wall_time_ms: Number(raw.wall_time_ms),
    }
    for (const key of ['k', 'seed', 'trial', 'steps_to_goal', 'steps_to_goal_ma10'] as const) {
      if (!Number.isFinite(row[key])) {
        throw new SchemaError(`${path}: non-numeric '${key}' in data row ${i + 1}`)
      }
    }
    return row
  })
}

export function readManyCsv(paths: string[]): ResultRow[] {
  return paths.flatMap(readResultsCsv)
}
