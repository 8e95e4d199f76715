// Wire types for the service's JSON bodies. Field names follow the
// server's serialization exactly; nothing here is renamed client-side.

export interface SessionInfo {
  token: string
  party_id: string
  roles: string[]
  origin: 'internal' | 'external-sso'
  expires_at: string
}

export interface PartyInfo {
  id: string
  kind: string
  name: string
  contact: string
  country: string
}

export interface DocumentInfo {
  id: string
  doc_type: string | null
  version: number
  digest: string
  media_type: string
  size: number
  received_at: string
  label: string
  visibility: 'public' | 'internal'
  associations: Array<{ kind: string; target: string }>
}

export interface CommunicationInfo {
  id: string
  direction: 'inbound' | 'outbound'
  comm_type: string
  sent_at: string
  body: string
  attachments: string[]
  in_reply_to: string | null
}

export interface NotificationInfo {
  code: string | null
  submitted_at: string | null
  form_data: Record<string, string>
  documents: string[]
  applicant: string
  applicant_role: string
}

export interface TeamInfo {
  supervisor: TeamMember
  technical: TeamMember
  medical: TeamMember
  assigned_at: string
}

export interface TeamMember {
  party_id: string
  name: string
}

export interface DossierDetail {
  key: string
  code: string | null
  state: string
  applicant: PartyInfo
  manufacturer: PartyInfo
  notification: NotificationInfo
  civ: Record<string, unknown>
  documents: DocumentInfo[]
  communications: CommunicationInfo[]
  audit: Array<Record<string, unknown>>
  team: TeamInfo | null
  expected_deadline: string | null
  created_at: string | null
}

export interface TimelineEntry {
  at: string
  kind: 'document' | 'communication' | 'state-change'
  label: string
  refs: string[]
}

export interface TimelineResponse {
  entries: TimelineEntry[]
}

export interface OpenRequestsResponse {
  requests: CommunicationInfo[]
}

export interface AllowedActions {
  state: string
  actions: string[]
}

export interface ValidationProblem {
  rule: string
  message: string
}

export interface ValidationResult {
  ok: boolean
  missing: string[]
  violations: ValidationProblem[]
}

export interface ReportInfo {
  dossier_key: string
  kind: 'technical' | 'medical'
  author: string
  body: Record<string, string>
  shared: boolean
  revision: number
}

export interface SearchRow {
  key: string
  code: string
  title: string
  manufacturer: string
  applicant_role: string
  submitted_at: string
  expected_deadline: string | null
  state: string
  evaluators: string[]
  last_document: string | null
  link: string
}

export interface SearchResponse {
  rows: SearchRow[]
}

export interface SubmissionReceipt {
  code: string
  key: string
  state: string
}

export interface ErrorBody {
  error: string
  detail: string
  missing?: string[]
  violations?: ValidationProblem[]
}
