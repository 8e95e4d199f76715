import type { AllowedActions } from '../api/types'

// Controls are generated, not hand-wired per screen: each control is tied
// to the lifecycle event it would fire, and enablement comes exclusively
// from the server's allowed-actions response for the current session.
// The client adds no permissions of its own and removes none.

export interface ControlSpec {
  id: string
  label: string
  /** lifecycle event kind this control fires */
  event: string
  audience: 'applicant' | 'staff'
}

export interface FormControl extends ControlSpec {
  enabled: boolean
}

export interface FormSection {
  audience: 'applicant' | 'staff'
  controls: FormControl[]
}

export interface FormDescriptor {
  state: string
  sections: FormSection[]
}

export const DOSSIER_CONTROLS: ControlSpec[] = [
  { id: 'register', label: 'Register organization', event: 'register-applicant', audience: 'applicant' },
  { id: 'new-draft', label: 'New notification', event: 'initialize-notification', audience: 'applicant' },
  { id: 'submit', label: 'Submit notification', event: 'submit-notification', audience: 'applicant' },
  { id: 'reply', label: 'Reply to request', event: 'provide-info', audience: 'applicant' },
  { id: 'start-report', label: 'Report investigation start', event: 'report-start', audience: 'applicant' },
  { id: 'amendment', label: 'File amendment', event: 'submit-amendment', audience: 'applicant' },
  { id: 'sae-initial', label: 'Report adverse event', event: 'report-sae-initial', audience: 'applicant' },
  { id: 'sae-final', label: 'Close adverse event', event: 'report-sae-final', audience: 'applicant' },
  { id: 'end-report', label: 'Report investigation end', event: 'report-end', audience: 'applicant' },
  { id: 'early-end', label: 'Report early termination', event: 'report-early-termination', audience: 'applicant' },
  { id: 'grant', label: 'Grant access', event: 'grant-access', audience: 'staff' },
  { id: 'team', label: 'Assign evaluation team', event: 'assign-team', audience: 'staff' },
  { id: 'request', label: 'Request information', event: 'request-info', audience: 'staff' },
  { id: 'orient-denial', label: 'Mark oriented toward denial', event: 'mark-oriented-denial', audience: 'staff' },
  { id: 'approve', label: 'Approve', event: 'approve', audience: 'staff' },
  { id: 'deny', label: 'Deny', event: 'deny', audience: 'staff' },
  { id: 'accept-final', label: 'Accept final report', event: 'accept-final-report', audience: 'staff' },
]

/**
 * Derive the rendered control set for one dossier screen. A control is
 * enabled iff its event kind is in the server's allowed set; everything
 * else renders greyed out.
 */
export function deriveFormDescriptor(
  allowed: AllowedActions,
  manifest: ControlSpec[] = DOSSIER_CONTROLS,
): FormDescriptor {
  const permitted = new Set(allowed.actions)
  const sections: FormSection[] = []
  for (const audience of ['applicant', 'staff'] as const) {
    const controls = manifest
      .filter((spec) => spec.audience === audience)
      .map((spec) => ({ ...spec, enabled: permitted.has(spec.event) }))
    if (controls.length > 0) sections.push({ audience, controls })
  }
  return { state: allowed.state, sections }
}

/** Flat view used by enablement checks and tests. */
export function enabledEvents(descriptor: FormDescriptor): Set<string> {
  const events = new Set<string>()
  for (const section of descriptor.sections) {
    for (const control of section.controls) {
      if (control.enabled) events.add(control.event)
    }
  }
  return events
}
