export interface StudentJson {
  id: string
  first_name: string
  last_name: string
  address: string
  contact_number: string
  faculty: string
  department: string
  degree_program: string
  graduation_batch_year: number
}

export type Verdict = 'Clear' | 'Dues' | 'Unknown'
export type Provider = 'Admissions' | 'Library' | 'Hostel'

export interface ProviderStatusJson {
  provider: Provider
  verdict: Verdict
  detail: string
  latency_ms: number
}

export interface NoDuesJson {
  student_id: string
  statuses: ProviderStatusJson[]
  overall: 'Clear' | 'Blocked'
  checked_at: string
}

export interface ExamJson {
  student_id: string
  programme_code: string
  outcome: 'Passed' | 'Failed' | 'Incomplete'
  recorded_at: string
}

export interface CertificateJson {
  serial: string
  student_id: string
  programme_code: string
  issued_at: string
  verification_snapshot: NoDuesJson
}

export interface RegistryEntryJson {
  name: string
  endpoint: string
  methods: string[]
  published_at: string | null
}

/** Normalized failure from the gateway: a fault reason, HTTP kind, or "transport". */
export class GatewayError extends Error {
  kind: string
  constructor(kind: string, message: string) {
    super(message)
    this.kind = kind
  }
}
