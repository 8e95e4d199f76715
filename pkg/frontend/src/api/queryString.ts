// Canonical query-string encoding for the search endpoints.
//
// The service defines one wire encoding that every client must emit
// byte-identically: fixed key order, sorted deduplicated values, RFC 3986
// unreserved-set percent encoding. Deviating here silently changes search
// semantics and breaks shareable URLs, so this module is pinned by
// fixtures generated from the service's own encoder.

export type FilterKind = 'single' | 'bool' | 'multi' | 'multi-int'

// declaration order is the canonical key order on the wire
export const QUERY_KEYS: ReadonlyArray<readonly [string, FilterKind]> = [
  ['notification-number', 'single'],
  ['year', 'multi-int'],
  ['state', 'multi'],
  ['applicant-role', 'multi'],
  ['company', 'single'],
  ['evaluator', 'multi'],
  ['product', 'single'],
  ['product-type', 'single'],
  ['risk-class', 'multi'],
  ['application-field', 'single'],
  ['characteristic', 'multi'],
  ['releases-drug', 'bool'],
  ['classification-code', 'single'],
  ['anatomical-location', 'single'],
  ['title', 'single'],
  ['study-design', 'multi'],
  ['population', 'multi'],
  ['site-country', 'single'],
] as const

export type Filters = Record<string, string | number | boolean | Array<string | number> | null | undefined>

const KIND_BY_KEY = new Map(QUERY_KEYS.map(([key, kind]) => [key, kind]))

/** Percent-encode everything outside the RFC 3986 unreserved set. */
export function encodeStrict(value: string): string {
  // encodeURIComponent leaves !*'() bare; the wire contract does not
  return encodeURIComponent(value).replace(
    /[!'()*]/g,
    (c) => '%' + c.charCodeAt(0).toString(16).toUpperCase(),
  )
}

function compareCodePoints(a: string, b: string): number {
  // code-point order, not UTF-16 code-unit order
  const eah = Array.from(a)
  const beh = Array.from(b)
  const n = Math.min(eah.length, beh.length)
  for (let i = 0; i < n; i++) {
    const ca = eah[i]!.codePointAt(0)!
    const cb = beh[i]!.codePointAt(0)!
    if (ca !== cb) return ca - cb
  }
  return eah.length - beh.length
}

function sortedUniqueStrings(values: Array<string | number>): string[] {
  return [...new Set(values.map(String))].sort(compareCodePoints)
}

function sortedUniqueInts(values: Array<string | number>): number[] {
  return [...new Set(values.map(Number))].sort((a, b) => a - b)
}

/**
 * Serialize filters to the canonical query string (no leading `?`).
 * Unknown keys are rejected rather than dropped: a typo that silently
 * widened a search would be worse than an error.
 */
export function encodeQueryString(filters: Filters): string {
  for (const key of Object.keys(filters)) {
    if (!KIND_BY_KEY.has(key)) throw new Error(`unknown query key '${key}'`)
  }
  const parts: string[] = []
  for (const [key, kind] of QUERY_KEYS) {
    const value = filters[key]
    if (value === null || value === undefined) continue
    if (kind === 'single') {
      if (value === '') continue
      parts.push(`${key}=${encodeStrict(String(value))}`)
    } else if (kind === 'bool') {
      parts.push(`${key}=${value ? 'true' : 'false'}`)
    } else if (kind === 'multi-int') {
      const values = Array.isArray(value) ? value : [value]
      for (const item of sortedUniqueInts(values)) parts.push(`${key}=${item}`)
    } else {
      const values = Array.isArray(value) ? value : [value]
      for (const item of sortedUniqueStrings(values)) parts.push(`${key}=${encodeStrict(item)}`)
    }
  }
  return parts.join('&')
}
