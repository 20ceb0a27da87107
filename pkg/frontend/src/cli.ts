#!/usr/bin/env node
import { writeFileSync } from 'fs'
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'
import { readManyCsv, SchemaError } from './csv.js'
import { buildCurves, GroupKey } from './grouping.js'
import { renderCurves } from './render.js'

const VALID_KEYS: GroupKey[] = ['env', 'k', 'metric', 'seed']

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .command('plot', 'render learning curves from results.csv files')
    .option('csv', { type: 'array', demandOption: true, describe: 'results.csv paths' })
    .option('group', { type: 'string', default: 'k,metric', describe: 'comma-separated group-by keys' })
    .option('window', { type: 'number', default: 10, describe: 'moving-average window' })
    .option('out', { type: 'string', default: 'curves.png', describe: 'output PNG path' })
    .option('title', { type: 'string', default: '' })
    .strict()
    .parse()

  const groupBy = args.group === '' ? [] : (args.group.split(',') as GroupKey[])
  for (const key of groupBy) {
    if (!VALID_KEYS.includes(key)) {
      console.error(`unknown group key '${key}'; valid keys: ${VALID_KEYS.join(', ')}`)
      return 2
    }
  }
  try {
    const rows = readManyCsv(args.csv.map(String))
    const curves = buildCurves(rows, groupBy, args.window)
    writeFileSync(args.out, renderCurves(curves, args.title))
    console.log(`wrote ${args.out} (${curves.length} curve${curves.length === 1 ? '' : 's'})`)
    return 0
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(String(err.message))
      return 2
    }
    console.error(String(err))
    return 1
  }
}

const invokedDirectly = process.argv[1]?.endsWith('cli.js') || process.argv[1]?.endsWith('gmmq-plot')
if (invokedDirectly) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code
  })
}
