import { ApiClient, ApiError, type DocumentUploadBody, type DraftBody } from '../api/client'
import type { DossierDetail, SubmissionReceipt, ValidationResult } from '../api/types'

// The submission wizard walks an applicant from an empty draft to a sealed
// notification. Two rules are loud and deliberate:
//
//  1. the submit control stays disabled until the *server's* validation of
//     the current draft comes back clean; the client never re-implements
//     completeness or consistency checks, it only displays them;
//  2. the moment the server confirms submission, every field flips to
//     read-only, mirroring the sealing rule enforced server-side.

export const WIZARD_STEPS = ['investigation', 'documents', 'review'] as const
export type WizardStep = (typeof WIZARD_STEPS)[number]

export interface StepState {
  id: WizardStep
  complete: boolean
}

export class WizardLocked extends Error {
  constructor() {
    super('the notification is sealed; no change is allowed')
  }
}

export class SubmitBlocked extends Error {
  readonly missing: string[]
  readonly problems: string[]

  constructor(missing: string[], problems: string[]) {
    super('submission blocked: the draft has not passed validation')
    this.missing = missing
    this.problems = problems
  }
}

export class NotificationWizard {
  private readonly client: ApiClient
  private record: DossierDetail | null = null
  private validation: ValidationResult | null = null
  private receipt: SubmissionReceipt | null = null

  constructor(client: ApiClient) {
    this.client = client
  }

  get draftId(): string | null {
    return this.record?.key ?? null
  }

  get submitted(): SubmissionReceipt | null {
    return this.receipt
  }

  /** All fields render read-only once the notification is sealed. */
  get readOnly(): boolean {
    return this.receipt !== null
  }

  /** Missing document types from the last server validation. */
  get missing(): string[] {
    return this.validation?.missing ?? []
  }

  /** Consistency findings from the last server validation, for inline display. */
  get problems(): string[] {
    return (this.validation?.violations ?? []).map((v) => `${v.rule}: ${v.message}`)
  }

  /** Enabled iff the server has validated the current draft clean. */
  get submitEnabled(): boolean {
    return !this.readOnly && this.validation !== null && this.validation.ok
  }

  stepStates(): StepState[] {
    return [
      { id: 'investigation', complete: this.record !== null },
      { id: 'documents', complete: this.validation !== null && this.validation.missing.length === 0 },
      { id: 'review', complete: this.submitEnabled || this.readOnly },
    ]
  }

  async start(draft: DraftBody): Promise<DossierDetail> {
    this.record = await this.client.createNotification(draft)
    this.validation = null
    return this.record
  }

  async setFields(patch: Record<string, string>): Promise<DossierDetail> {
    const id = this.requireEditable()
    this.record = await this.client.updateNotificationForm(id, { form: patch, merge: true })
    this.validation = null // stale until the server re-checks
    return this.record
  }

  async setInvestigation(civ: Record<string, unknown>): Promise<DossierDetail> {
    const id = this.requireEditable()
    this.record = await this.client.updateNotificationForm(id, { civ })
    this.validation = null
    return this.record
  }

  async attachDocument(upload: DocumentUploadBody): Promise<void> {
    const id = this.requireEditable()
    await this.client.uploadDocument(id, upload)
    this.validation = null
  }

  /** Ask the server to validate the draft; gates the submit control. */
  async refreshValidation(): Promise<ValidationResult> {
    const id = this.requireDraft()
    this.validation = await this.client.getValidation(id)
    return this.validation
  }

  async submit(): Promise<SubmissionReceipt> {
    const id = this.requireDraft()
    if (this.readOnly) throw new WizardLocked()
    if (!this.submitEnabled) {
      throw new SubmitBlocked(this.missing, this.problems)
    }
    try {
      this.receipt = await this.client.submitNotification(id)
    } catch (error) {
      if (error instanceof ApiError) {
        // the draft changed under us or the server found new gaps:
        // stay editable and surface the server's findings
        this.validation = {
          ok: false,
          missing: error.missing,
          violations: error.violations,
        }
      }
      throw error
    }
    return this.receipt
  }

  /**
   * Serialize the draft in the offline bundle layout: a notification.form
   * of sorted key=value lines plus one file per uploaded document type.
   * The encoding must parse identically on the service side.
   */
  exportBundle(): { name: string; content: string }[] {
    const record = this.requireRecord()
    const form = record.notification.form_data
    const lines = Object.keys(form)
      .sort()
      .map((key) => `${key}=${form[key]}\n`)
      .join('')
    const files: { name: string; content: string }[] = [{ name: 'notification.form', content: lines }]
    for (const doc of record.documents) {
      if (doc.doc_type && doc.visibility === 'public') {
        files.push({ name: `${doc.doc_type}.pdf`, content: doc.digest })
      }
    }
    return files
  }

  private requireRecord(): DossierDetail {
    if (this.record === null) throw new Error('the wizard has no draft yet')
    return this.record
  }

  private requireDraft(): string {
    return this.requireRecord().key
  }

  private requireEditable(): string {
    if (this.readOnly) throw new WizardLocked()
    return this.requireDraft()
  }
}
