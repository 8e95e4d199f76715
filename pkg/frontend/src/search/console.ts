import type { ApiClient } from '../api/client'
import { QUERY_KEYS, encodeQueryString, type Filters } from '../api/queryString'
import type { SearchRow } from '../api/types'

// Facet state for the monitoring console. Multi-valued facets are real
// multi-selects; the serialized query string is the canonical encoding,
// so a console URL can be pasted anywhere the API is spoken.

const MULTI = new Set(
  QUERY_KEYS.filter(([, kind]) => kind === 'multi' || kind === 'multi-int').map(([key]) => key),
)
const KNOWN = new Set(QUERY_KEYS.map(([key]) => key))

export interface ResultRow {
  code: string
  title: string
  company: string
  applicantRole: string
  submittedAt: string
  expectedDeadline: string | null
  state: string
  evaluators: string
  lastDocument: string | null
  href: string
}

export class SearchConsole {
  private readonly selections = new Map<string, Set<string | number>>()
  private readonly singles = new Map<string, string | boolean>()

  /** Toggle one value of a multi-select facet on or off. */
  toggle(key: string, value: string | number): void {
    if (!MULTI.has(key)) throw new Error(`'${key}' is not a multi-select facet`)
    const current = this.selections.get(key) ?? new Set<string | number>()
    if (current.has(value)) {
      current.delete(value)
    } else {
      current.add(value)
    }
    if (current.size === 0) {
      this.selections.delete(key)
    } else {
      this.selections.set(key, current)
    }
  }

  setSingle(key: string, value: string | boolean | null): void {
    if (!KNOWN.has(key) || MULTI.has(key)) throw new Error(`'${key}' is not a single-value filter`)
    if (value === null || value === '') {
      this.singles.delete(key)
    } else {
      this.singles.set(key, value)
    }
  }

  clear(): void {
    this.selections.clear()
    this.singles.clear()
  }

  get filters(): Filters {
    const filters: Filters = {}
    for (const [key, values] of this.selections) filters[key] = [...values]
    for (const [key, value] of this.singles) filters[key] = value
    return filters
  }

  /** Canonical query string for the current facet selection. */
  get queryString(): string {
    return encodeQueryString(this.filters)
  }

  async run(client: ApiClient): Promise<ResultRow[]> {
    const response = await client.search(this.filters)
    return response.rows.map(toResultRow)
  }
}

export function toResultRow(row: SearchRow): ResultRow {
  return {
    code: row.code,
    title: row.title,
    company: row.manufacturer,
    applicantRole: row.applicant_role,
    submittedAt: row.submitted_at,
    expectedDeadline: row.expected_deadline,
    state: row.state,
    evaluators: row.evaluators.join(', '),
    lastDocument: row.last_document,
    href: row.link,
  }
}
