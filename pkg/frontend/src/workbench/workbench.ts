import { ApiClient, ApiError, type DecisionInfo } from '../api/client'
import type { AllowedActions, DossierDetail, ReportInfo } from '../api/types'

// Evaluator and supervisor workbench. The screen-state rules mirror
// server policy but never replace it: every save, share and decide call
// goes to the service, and a denial there is surfaced and reflected,
// not predicted away. canEdit/decisionEnabled exist so controls grey
// out; the server remains the judge when a stale screen fires anyway.

export type ReportKind = 'technical' | 'medical'

const ACTIVE_EVALUATION = new Set([
  'evaluation:in-progress',
  'evaluation:info-requested',
  'evaluation:oriented-toward-denial',
])

export interface ReportPanel {
  kind: ReportKind
  /** null when the server withheld the report from this session */
  report: ReportInfo | null
  withheldReason: string | null
}

export interface WorkbenchUser {
  partyId: string
  roles: string[]
}

export class EvaluatorWorkbench {
  private readonly client: ApiClient
  private readonly code: string
  private readonly user: WorkbenchUser
  private detail: DossierDetail | null = null
  private allowed: AllowedActions | null = null
  private panels = new Map<ReportKind, ReportPanel>()
  /** server rejections surfaced to the screen, newest last */
  readonly notices: string[] = []

  constructor(client: ApiClient, code: string, user: WorkbenchUser) {
    this.client = client
    this.code = code
    this.user = user
  }

  async load(): Promise<void> {
    this.detail = await this.client.getDossier(this.code)
    this.allowed = await this.client.getAllowedActions(this.code)
    for (const kind of ['technical', 'medical'] as ReportKind[]) {
      try {
        const report = await this.client.getReport(this.code, kind)
        this.panels.set(kind, { kind, report, withheldReason: null })
      } catch (error) {
        if (error instanceof ApiError && (error.status === 403 || error.status === 404)) {
          this.panels.set(kind, { kind, report: null, withheldReason: error.detail })
        } else {
          throw error
        }
      }
    }
  }

  get state(): string {
    return this.allowed?.state ?? ''
  }

  panel(kind: ReportKind): ReportPanel {
    const panel = this.panels.get(kind)
    if (!panel) throw new Error(`workbench not loaded; no ${kind} panel`)
    return panel
  }

  private seatOwner(kind: ReportKind): string | null {
    const team = this.detail?.team
    if (!team) return null
    return kind === 'technical' ? team.technical.party_id : team.medical.party_id
  }

  /** The editor is writable only on the session owner's seat during active evaluation. */
  canEdit(kind: ReportKind): boolean {
    return this.seatOwner(kind) === this.user.partyId && ACTIVE_EVALUATION.has(this.state)
  }

  async save(
    kind: ReportKind,
    body: { device_characteristics?: string; risk_analysis?: string; patient_safety?: string },
  ): Promise<ReportInfo | null> {
    const current = this.panels.get(kind)?.report
    const expected = current ? current.revision : 0
    try {
      const saved = await this.client.saveReport(this.code, kind, body, expected)
      this.panels.set(kind, { kind, report: saved, withheldReason: null })
      return saved
    } catch (error) {
      this.surface(error)
      throw error
    }
  }

  /** Sharing is one-way; the toggle disappears once the report is shared. */
  shareVisible(kind: ReportKind): boolean {
    const report = this.panels.get(kind)?.report
    return report !== null && report !== undefined && !report.shared && this.canEdit(kind)
  }

  async share(kind: ReportKind): Promise<void> {
    try {
      const shared = await this.client.shareReport(this.code, kind)
      this.panels.set(kind, { kind, report: shared, withheldReason: null })
    } catch (error) {
      this.surface(error)
      throw error
    }
  }

  private bothShared(): boolean {
    const technical = this.panels.get('technical')?.report
    const medical = this.panels.get('medical')?.report
    return Boolean(technical?.shared && medical?.shared)
  }

  /** The decision composer opens only for a supervisor holding both shared reports. */
  get decisionEnabled(): boolean {
    const canDecide =
      this.allowed !== null &&
      (this.allowed.actions.includes('approve') || this.allowed.actions.includes('deny'))
    return canDecide && this.bothShared()
  }

  async decide(outcome: 'approve' | 'deny', rationale: string): Promise<DecisionInfo> {
    try {
      return await this.client.postDecision(this.code, outcome, rationale)
    } catch (error) {
      this.surface(error)
      throw error
    }
  }

  private surface(error: unknown): void {
    if (error instanceof ApiError) {
      this.notices.push(`${error.kind}: ${error.detail}`)
    }
  }
}
