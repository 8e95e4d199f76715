import type {
  AllowedActions,
  CommunicationInfo,
  DocumentInfo,
  DossierDetail,
  ErrorBody,
  OpenRequestsResponse,
  ReportInfo,
  SearchResponse,
  SessionInfo,
  SubmissionReceipt,
  TimelineResponse,
  ValidationResult,
} from './types'
import { encodeQueryString, type Filters } from './queryString'

// Minimal slice of the fetch Response the client relies on, so tests can
// stub transport without a browser or node polyfill specifics.
export interface HttpResponse {
  status: number
  json(): Promise<unknown>
}

export type FetchLike = (path: string, init: RequestOptions) => Promise<HttpResponse>

export interface RequestOptions {
  method: string
  headers: Record<string, string>
  body?: string
}

/** Error envelope from the service, thrown for every non-2xx response. */
export class ApiError extends Error {
  readonly status: number
  readonly kind: string
  readonly detail: string
  readonly missing: string[]
  readonly violations: Array<{ rule: string; message: string }>

  constructor(status: number, body: ErrorBody) {
    super(`${body.error}: ${body.detail}`)
    this.status = status
    this.kind = body.error
    this.detail = body.detail
    this.missing = body.missing ?? []
    this.violations = body.violations ?? []
  }
}

export interface DocumentUploadBody {
  content_base64: string
  doc_type?: string | null
  label?: string
  media_type?: string
  visibility?: 'public' | 'internal'
}

export interface DraftBody {
  applicant_role: string
  civ: Record<string, unknown>
  form?: Record<string, string>
  manufacturer_id?: string
  expected_deadline?: string
}

export interface DecisionInfo {
  outcome: string
  rationale: string
  decided_at: string
}

export interface EventReceipt {
  audit: Record<string, unknown>
  document: DocumentInfo | null
  state: string
}

let idempotencyCounter = 0

function freshIdempotencyKey(): string {
  idempotencyCounter += 1
  return `ui-${Date.now().toString(36)}-${idempotencyCounter}`
}

/**
 * Thin typed wrapper over the HTTP API. Holds the bearer token and maps
 * error envelopes to ApiError. It performs no authorization logic of its
 * own: every mutation is sent and the server's verdict is surfaced.
 */
export class ApiClient {
  private readonly fetchLike: FetchLike
  private token: string | null = null

  constructor(fetchLike: FetchLike) {
    this.fetchLike = fetchLike
  }

  setToken(token: string | null): void {
    this.token = token
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    idempotencyKey?: string,
  ): Promise<T> {
    const headers: Record<string, string> = { accept: 'application/json' }
    if (this.token) headers['authorization'] = `Bearer ${this.token}`
    if (body !== undefined) headers['content-type'] = 'application/json'
    if (idempotencyKey) headers['idempotency-key'] = idempotencyKey
    const response = await this.fetchLike(path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    })
    const payload = (await response.json()) as unknown
    if (response.status >= 400) {
      throw new ApiError(response.status, payload as ErrorBody)
    }
    return payload as T
  }

  // -- sessions ------------------------------------------------------------

  async internalLogin(username: string, secret: string): Promise<SessionInfo> {
    const session = await this.request<SessionInfo>('POST', '/sessions/internal', {
      username,
      secret,
    })
    this.setToken(session.token)
    return session
  }

  async ssoLogin(token: string): Promise<SessionInfo> {
    const session = await this.request<SessionInfo>('POST', '/sessions/sso', { token })
    this.setToken(session.token)
    return session
  }

  // -- notification drafting ------------------------------------------------

  createNotification(body: DraftBody, idempotencyKey = freshIdempotencyKey()): Promise<DossierDetail> {
    return this.request('POST', '/notifications', body, idempotencyKey)
  }

  getNotification(id: string): Promise<DossierDetail> {
    return this.request('GET', `/notifications/${id}`)
  }

  updateNotificationForm(
    id: string,
    body: { form?: Record<string, string>; merge?: boolean; civ?: Record<string, unknown>; expected_deadline?: string },
  ): Promise<DossierDetail> {
    return this.request('PUT', `/notifications/${id}/form`, body)
  }

  getValidation(id: string): Promise<ValidationResult> {
    return this.request('GET', `/notifications/${id}/validation`)
  }

  uploadDocument(
    id: string,
    body: DocumentUploadBody,
    idempotencyKey = freshIdempotencyKey(),
  ): Promise<DocumentInfo> {
    return this.request('POST', `/notifications/${id}/documents`, body, idempotencyKey)
  }

  submitNotification(id: string, idempotencyKey = freshIdempotencyKey()): Promise<SubmissionReceipt> {
    return this.request('POST', `/notifications/${id}/submit`, {}, idempotencyKey)
  }

  // -- dossiers --------------------------------------------------------------

  getDossier(code: string): Promise<DossierDetail> {
    return this.request('GET', `/dossiers/${code}`)
  }

  getTimeline(code: string, order: 'asc' | 'desc' = 'desc'): Promise<TimelineResponse> {
    return this.request('GET', `/dossiers/${code}/timeline?order=${order}`)
  }

  getOpenRequests(code: string): Promise<OpenRequestsResponse> {
    return this.request('GET', `/dossiers/${code}/open-requests`)
  }

  getAllowedActions(code: string): Promise<AllowedActions> {
    return this.request('GET', `/dossiers/${code}/allowed-actions`)
  }

  /** Stable download path for a document blob; protocol codes keep their slashes. */
  documentContentPath(code: string, documentId: string): string {
    return `/dossiers/${code}/documents/${documentId}/content`
  }

  // -- evaluation -------------------------------------------------------------

  getReport(code: string, kind: 'technical' | 'medical'): Promise<ReportInfo> {
    return this.request('GET', `/dossiers/${code}/reports/${kind}`)
  }

  saveReport(
    code: string,
    kind: 'technical' | 'medical',
    body: { device_characteristics?: string; risk_analysis?: string; patient_safety?: string },
    expectedRevision: number,
  ): Promise<ReportInfo> {
    return this.request('PUT', `/dossiers/${code}/reports/${kind}`, {
      body,
      revision: expectedRevision,
    })
  }

  shareReport(code: string, kind: 'technical' | 'medical'): Promise<ReportInfo> {
    return this.request('POST', `/dossiers/${code}/reports/${kind}/share`, {})
  }

  postDecision(
    code: string,
    outcome: 'approve' | 'deny',
    rationale: string,
    idempotencyKey = freshIdempotencyKey(),
  ): Promise<DecisionInfo> {
    return this.request('POST', `/dossiers/${code}/decision`, { outcome, rationale }, idempotencyKey)
  }

  postEvent(
    code: string,
    kind: string,
    payload: Record<string, string> = {},
    idempotencyKey = freshIdempotencyKey(),
  ): Promise<EventReceipt> {
    return this.request('POST', `/dossiers/${code}/events`, { kind, payload }, idempotencyKey)
  }

  openCommunication(
    code: string,
    body: { comm_type: string; body: string; attachments?: DocumentUploadBody[] },
    idempotencyKey = freshIdempotencyKey(),
  ): Promise<CommunicationInfo> {
    return this.request('POST', `/dossiers/${code}/communications`, body, idempotencyKey)
  }

  reply(
    communicationId: string,
    body: { body: string; attachments?: DocumentUploadBody[] },
    idempotencyKey = freshIdempotencyKey(),
  ): Promise<CommunicationInfo> {
    return this.request('POST', `/communications/${communicationId}/reply`, body, idempotencyKey)
  }

  // -- monitoring ---------------------------------------------------------------

  search(filters: Filters): Promise<SearchResponse> {
    const query = encodeQueryString(filters)
    return this.request('GET', query ? `/search?${query}` : '/search')
  }

  stats(filters: Filters): Promise<Record<string, Record<string, number>>> {
    const query = encodeQueryString(filters)
    return this.request('GET', query ? `/stats?${query}` : '/stats')
  }
}
