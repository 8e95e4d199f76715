import type {
  AllowedActions,
  CommunicationInfo,
  DossierDetail,
  OpenRequestsResponse,
  TimelineResponse,
} from '../api/types'

// The dossier page is two tables: archival documents on top (newest
// first, as served), the request/response thread below. Whether a request
// still awaits an answer is the server's call (the open-requests
// endpoint), never recomputed here; the view only cross-references ids.

export interface AttachmentLink {
  documentId: string
  label: string
  href: string
}

export interface DocumentRow {
  at: string
  label: string
  attachments: AttachmentLink[]
}

export interface RequestRow {
  id: string
  commType: string
  direction: 'inbound' | 'outbound'
  sentAt: string
  body: string
  inReplyTo: string | null
  attachments: AttachmentLink[]
  /** true when the server lists this request as still unanswered */
  flagged: boolean
}

export interface DossierView {
  code: string
  state: string
  title: string
  documentRows: DocumentRow[]
  requestRows: RequestRow[]
  openRequestCount: number
  /** the reply control renders only when the session may provide info */
  replyEnabled: boolean
  emptyMessage: string | null
}

function attachmentLinks(
  detail: DossierDetail,
  ids: string[],
  pathFor: (documentId: string) => string,
): AttachmentLink[] {
  const byId = new Map(detail.documents.map((doc) => [doc.id, doc]))
  return ids.map((id) => {
    const doc = byId.get(id)
    return {
      documentId: id,
      label: doc ? doc.label || doc.doc_type || id : id,
      href: pathFor(id),
    }
  })
}

export function buildDossierView(
  detail: DossierDetail,
  timeline: TimelineResponse,
  openRequests: OpenRequestsResponse,
  allowed: AllowedActions,
): DossierView {
  const code = detail.code ?? detail.key
  const pathFor = (documentId: string) => `/dossiers/${code}/documents/${documentId}/content`

  const documentRows: DocumentRow[] = timeline.entries
    .filter((entry) => entry.kind === 'document')
    .map((entry) => ({
      at: entry.at,
      label: entry.label,
      attachments: attachmentLinks(detail, entry.refs, pathFor),
    }))

  const openIds = new Set(openRequests.requests.map((request) => request.id))
  const requestRows: RequestRow[] = detail.communications.map((comm: CommunicationInfo) => ({
    id: comm.id,
    commType: comm.comm_type,
    direction: comm.direction,
    sentAt: comm.sent_at,
    body: comm.body,
    inReplyTo: comm.in_reply_to,
    attachments: attachmentLinks(detail, comm.attachments, pathFor),
    flagged: openIds.has(comm.id),
  }))

  const empty = timeline.entries.length === 0 && detail.communications.length === 0

  return {
    code,
    state: detail.state,
    title: (detail.civ['title'] as string | undefined) ?? '',
    documentRows,
    requestRows,
    openRequestCount: openIds.size,
    replyEnabled: allowed.actions.includes('provide-info'),
    emptyMessage: empty ? 'No activity recorded for this dossier yet.' : null,
  }
}
