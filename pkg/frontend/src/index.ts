export { ApiClient, ApiError } from './api/client'
export type { FetchLike, HttpResponse, RequestOptions, DraftBody, DocumentUploadBody } from './api/client'
export { encodeQueryString, encodeStrict, QUERY_KEYS } from './api/queryString'
export type { Filters } from './api/queryString'
export * from './api/types'
export { deriveFormDescriptor, enabledEvents, DOSSIER_CONTROLS } from './forms/descriptor'
export type { FormDescriptor, FormControl, ControlSpec } from './forms/descriptor'
export { NotificationWizard, WizardLocked, SubmitBlocked, WIZARD_STEPS } from './wizard/wizard'
export { buildDossierView } from './dossier/view'
export type { DossierView, DocumentRow, RequestRow, AttachmentLink } from './dossier/view'
export { SearchConsole, toResultRow } from './search/console'
export type { ResultRow } from './search/console'
export { EvaluatorWorkbench } from './workbench/workbench'
export type { ReportKind, ReportPanel, WorkbenchUser } from './workbench/workbench'
