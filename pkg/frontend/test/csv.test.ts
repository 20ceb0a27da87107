import { describe, expect, it } from 'vitest'
import { mkdtempSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import { dirname, join } from 'path'
import { fileURLToPath } from 'url'
import { readResultsCsv, SchemaError } from '../src/csv.js'

const FIXTURE = join(dirname(fileURLToPath(import.meta.url)), '..', 'fixtures', 'pendulum_2seed.csv')

describe('readResultsCsv', () => {
  it('parses the fixture with typed numeric fields', () => {
    const rows = readResultsCsv(FIXTURE)
    expect(rows.length).toBe(60)
    expect(rows[0].env).toBe('pendulum')
    expect(typeof rows[0].steps_to_goal).toBe('number')
    expect(new Set(rows.map((r) => r.k))).toEqual(new Set([2, 3]))
  })

  it('reports a column diff on schema mismatch', () => {
    const dir = mkdtempSync(join(tmpdir(), 'plotkit-'))
    const bad = join(dir, 'bad.csv')
    writeFileSync(bad, 'env,k,metric,seed,trial,steps,final_loss\npendulum,1,affi,0,1,5,0.1\n')
    expect(() => readResultsCsv(bad)).toThrow(SchemaError)
    try {
      readResultsCsv(bad)
    } catch (err) {
      const message = (err as Error).message
      expect(message).toContain('steps_to_goal')  // missing column named
      expect(message).toContain('steps')          // unexpected column named
    }
  })

  it('rejects non-numeric payloads', () => {
    const dir = mkdtempSync(join(tmpdir(), 'plotkit-'))
    const bad = join(dir, 'nan.csv')
    writeFileSync(
      bad,
      'env,k,metric,seed,trial,steps_to_goal,steps_to_goal_ma10,final_loss,wall_time_ms\n' +
        'pendulum,one,affi,0,1,5,5,0.1,2\n',
    )
    expect(() => readResultsCsv(bad)).toThrow(SchemaError)
  })
})
