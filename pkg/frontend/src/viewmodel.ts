import {
  CertificateJson,
  ExamJson,
  NoDuesJson,
  Provider,
  ProviderStatusJson,
  StudentJson,
  Verdict,
} from './types.js'

export const PROVIDERS: Provider[] = ['Admissions', 'Library', 'Hostel']

const STUDENT_ID = /^S-\d{4}-\d{4}$/
const YEAR_FLOOR = 1947

/** Client-side checks mirroring the backend's student record invariants. */
export function validateRegistration(
  form: StudentJson,
  currentYear: number = new Date().getFullYear(),
): Partial<Record<keyof StudentJson, string>> {
  const errors: Partial<Record<keyof StudentJson, string>> = {}
  if (!STUDENT_ID.test(form.id)) errors.id = 'id must match S-YYYY-NNNN'
  if (!form.first_name.trim()) errors.first_name = 'first name is required'
  if (!form.last_name.trim()) errors.last_name = 'last name is required'
  const year = form.graduation_batch_year
  if (!Number.isInteger(year) || year < YEAR_FLOOR || year > currentYear + 8) {
    errors.graduation_batch_year = `year must be within ${YEAR_FLOOR}..${currentYear + 8}`
  }
  return errors
}

export type RowState =
  | { state: 'idle' }
  | { state: 'pending' }
  | { state: 'settled'; verdict: Verdict; detail: string; latencyMs: number }

export interface CertificateView {
  student: StudentJson | null
  exams: ExamJson[]
  rows: Record<Provider, RowState>
  overall: 'Clear' | 'Blocked' | null
  verifying: boolean
  issuing: boolean
  certificate: CertificateJson | null
  refusal: string | null
}

function idleRows(): Record<Provider, RowState> {
  return { Admissions: { state: 'idle' }, Library: { state: 'idle' }, Hostel: { state: 'idle' } }
}

/**
 * State machine behind the certificate page. Holds no authoritative data:
 * everything is rebuilt from backend reads, and the Issue control is never
 * enabled unless the last completed verification came back Clear and a
 * Passed exam record exists.
 */
export class CertificateViewModel {
  view: CertificateView = {
    student: null,
    exams: [],
    rows: idleRows(),
    overall: null,
    verifying: false,
    issuing: false,
    certificate: null,
    refusal: null,
  }

  selectStudent(student: StudentJson, exams: ExamJson[]): void {
    this.view.student = student
    this.view.exams = exams
    this.view.rows = idleRows()
    this.view.overall = null
    this.view.certificate = null
    this.view.refusal = null
  }

  get passedProgrammes(): string[] {
    return this.view.exams.filter((e) => e.outcome === 'Passed').map((e) => e.programme_code)
  }

  /** The one gating rule: Clear verification + a Passed exam + nothing in flight. */
  get canIssue(): boolean {
    return (
      this.view.student !== null &&
      this.view.overall === 'Clear' &&
      this.passedProgrammes.length > 0 &&
      !this.view.verifying &&
      !this.view.issuing
    )
  }

  beginVerify(): void {
    this.view.verifying = true
    this.view.overall = null
    this.view.refusal = null
    for (const p of PROVIDERS) this.view.rows[p] = { state: 'pending' }
  }

  rowSettled(row: ProviderStatusJson): void {
    this.view.rows[row.provider] = {
      state: 'settled',
      verdict: row.verdict,
      detail: row.detail,
      latencyMs: row.latency_ms,
    }
  }

  verifyCompleted(status: NoDuesJson): void {
    for (const row of status.statuses) this.rowSettled(row)
    this.view.overall = status.overall
    this.view.verifying = false
  }

  /** Transport failures render as Unknown rows, never blank. */
  verifyFailed(message: string): void {
    for (const p of PROVIDERS) {
      if (this.view.rows[p].state !== 'settled') {
        this.view.rows[p] = { state: 'settled', verdict: 'Unknown', detail: message, latencyMs: 0 }
      }
    }
    this.view.overall = 'Blocked'
    this.view.verifying = false
  }

  beginIssue(): void {
    this.view.issuing = true
    this.view.refusal = null
  }

  issueSucceeded(cert: CertificateJson): void {
    this.view.certificate = cert
    this.view.issuing = false
  }

  issueRefused(kind: string, message: string): void {
    this.view.refusal = `${kind}: ${message}`
    this.view.issuing = false
    if (kind === 'DuesOutstanding') this.view.overall = 'Blocked'
  }
}
