import {
  CertificateJson,
  ExamJson,
  GatewayError,
  NoDuesJson,
  Provider,
  ProviderStatusJson,
  RegistryEntryJson,
  StudentJson,
} from './types.js'

type FetchFn = typeof fetch

/**
 * Thin client over the backend's /bridge endpoints. One method per backend
 * call, no business logic; every failure becomes a GatewayError.
 */
export class GatewayClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchFn = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let resp: Response
    try {
      resp = await this.fetchFn(`${this.baseUrl}${path}`, {
        method,
        headers: body === undefined ? {} : { 'Content-Type': 'application/json' },
        body: body === undefined ? undefined : JSON.stringify(body),
      })
    } catch (e) {
      throw new GatewayError('transport', e instanceof Error ? e.message : String(e))
    }
    let payload: unknown = null
    try {
      payload = await resp.json()
    } catch {
      throw new GatewayError('transport', `unintelligible reply (${resp.status})`)
    }
    if (!resp.ok) {
      const err = payload as { kind?: string; message?: string }
      throw new GatewayError(err.kind ?? `http-${resp.status}`, err.message ?? 'request failed')
    }
    return payload as T
  }

  searchStudents(q: string): Promise<StudentJson[]> {
    return this.request('GET', `/bridge/students?q=${encodeURIComponent(q)}`)
  }

  getStudent(id: string): Promise<StudentJson> {
    return this.request('GET', `/bridge/students/${encodeURIComponent(id)}`)
  }

  registerStudent(form: StudentJson): Promise<{ id: string }> {
    return this.request('POST', '/bridge/students', form)
  }

  enrollMember(id: string): Promise<{ ok: boolean }> {
    return this.request('POST', `/bridge/students/${encodeURIComponent(id)}/enroll`, {})
  }

  examResults(id: string): Promise<ExamJson[]> {
    return this.request('GET', `/bridge/students/${encodeURIComponent(id)}/exams`)
  }

  verify(id: string): Promise<NoDuesJson> {
    return this.request('GET', `/bridge/verify/${encodeURIComponent(id)}`)
  }

  providerRow(id: string, provider: Provider): Promise<ProviderStatusJson> {
    return this.request(
      'GET',
      `/bridge/verify/${encodeURIComponent(id)}/provider/${provider}`,
    )
  }

  issueCertificate(student: string, programme: string): Promise<CertificateJson> {
    return this.request('POST', '/bridge/issue', { student, programme })
  }

  registry(): Promise<RegistryEntryJson[]> {
    return this.request('GET', '/bridge/registry')
  }
}
