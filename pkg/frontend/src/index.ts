export { EXPECTED_COLUMNS, readManyCsv, readResultsCsv, SchemaError } from './csv.js'
export type { ResultRow } from './csv.js'
export { movingAverage } from './smoothing.js'
export { buildCurves } from './grouping.js'
export type { Curve, GroupKey } from './grouping.js'
export { renderCurves } from './render.js'
export { encodePng, pngDimensions } from './png.js'
