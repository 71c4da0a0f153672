import { GatewayClient } from './client.js'
import { GatewayError, Provider, StudentJson } from './types.js'
import { CertificateViewModel, PROVIDERS, RowState } from './viewmodel.js'

export interface CertificateController {
  vm: CertificateViewModel
  search(q: string): Promise<StudentJson[]>
  select(id: string): Promise<void>
  verify(): Promise<void>
  issue(programme: string): Promise<void>
  refreshExams(): Promise<void>
}

function esc(s: unknown): string {
  return String(s).replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
}

function rowHtml(provider: Provider, row: RowState): string {
  if (row.state === 'idle') {
    return `<tr data-provider="${provider}"><td>${provider}</td><td class="muted">—</td><td></td><td></td></tr>`
  }
  if (row.state === 'pending') {
    return `<tr data-provider="${provider}"><td>${provider}</td><td class="muted">checking…</td><td></td><td></td></tr>`
  }
  const cls = row.verdict === 'Clear' ? 'ok' : row.verdict === 'Dues' ? 'dues' : 'unknown'
  return `<tr data-provider="${provider}" class="${cls}">
    <td>${provider}</td><td class="verdict">${row.verdict}</td>
    <td>${esc(row.detail)}</td><td>${row.latencyMs} ms</td></tr>`
}

export function mountCertificatePage(root: Element, client: GatewayClient): CertificateController {
  root.innerHTML = `
    <h2>Degree certificate</h2>
    <div class="search-row">
      <input id="cert-search" placeholder="search students by name or department">
      <button id="cert-search-go">Search</button>
    </div>
    <ul id="cert-results"></ul>
    <div id="cert-detail" hidden>
      <h3 id="cert-student"></h3>
      <p id="cert-exams" class="hint"></p>
      <button id="cert-verify">Verify No-Dues</button>
      <table id="cert-rows"><tbody></tbody></table>
      <p id="cert-overall"></p>
      <div id="cert-issue-row" hidden>
        <select id="cert-programme"></select>
        <button id="cert-issue">Issue certificate</button>
      </div>
      <div class="banner ok" id="cert-result" hidden></div>
      <div class="banner error" id="cert-refusal" hidden></div>
    </div>`

  const vm = new CertificateViewModel()
  const el = <T extends Element>(sel: string) => root.querySelector(sel) as T

  function render(): void {
    const view = vm.view
    const detail = el<HTMLElement>('#cert-detail')
    detail.hidden = view.student === null
    if (view.student) {
      el<HTMLElement>('#cert-student').textContent =
        `${view.student.id} — ${view.student.first_name} ${view.student.last_name}` +
        ` (${view.student.degree_program}, ${view.student.graduation_batch_year})`
      el<HTMLElement>('#cert-exams').textContent = view.exams.length
        ? 'Exams: ' + view.exams.map((e) => `${e.programme_code}=${e.outcome}`).join(', ')
        : 'No exam results recorded.'
    }

    el<HTMLElement>('#cert-rows tbody').innerHTML = PROVIDERS.map((p) =>
      rowHtml(p, view.rows[p]),
    ).join('')

    const overall = el<HTMLElement>('#cert-overall')
    overall.textContent = view.overall ? `Overall: ${view.overall}` : ''
    overall.className = view.overall === 'Clear' ? 'ok' : view.overall ? 'dues' : ''

    const verifyBtn = el<HTMLButtonElement>('#cert-verify')
    verifyBtn.disabled = view.verifying || view.student === null

    // The gating invariant, reflected in the DOM: the issue control is only
    // rendered enabled when the view model allows issuance.
    const issueRow = el<HTMLElement>('#cert-issue-row')
    const issueBtn = el<HTMLButtonElement>('#cert-issue')
    issueRow.hidden = !vm.canIssue && view.certificate === null
    issueBtn.disabled = !vm.canIssue
    const select = el<HTMLSelectElement>('#cert-programme')
    const options = vm.passedProgrammes
    if (
      options.length !== select.options.length ||
      options.some((o, i) => select.options[i]?.value !== o)
    ) {
      select.innerHTML = options.map((p) => `<option value="${p}">${p}</option>`).join('')
    }

    const result = el<HTMLElement>('#cert-result')
    result.hidden = view.certificate === null
    if (view.certificate) {
      result.textContent =
        `Issued ${view.certificate.serial} for ${view.certificate.student_id}` +
        ` (${view.certificate.programme_code}) at ${view.certificate.issued_at}`
    }
    const refusal = el<HTMLElement>('#cert-refusal')
    refusal.hidden = view.refusal === null
    refusal.textContent = view.refusal ?? ''
  }

  const controller: CertificateController = {
    vm,

    async search(q: string): Promise<StudentJson[]> {
      const hits = await client.searchStudents(q)
      el<HTMLElement>('#cert-results').innerHTML = hits
        .map(
          (s) =>
            `<li><a href="#" data-student="${s.id}">${s.id}</a> ` +
            `${esc(s.first_name)} ${esc(s.last_name)} — ${esc(s.department)}</li>`,
        )
        .join('')
      return hits
    },

    async select(id: string): Promise<void> {
      const [student, exams] = [await client.getStudent(id), await client.examResults(id)]
      vm.selectStudent(student, exams)
      render()
    },

    async refreshExams(): Promise<void> {
      if (!vm.view.student) return
      vm.view.exams = await client.examResults(vm.view.student.id)
      render()
    },

    async verify(): Promise<void> {
      const student = vm.view.student
      if (!student || vm.view.verifying) return
      vm.beginVerify()
      render()

      // Rows stream in independently; the aggregate call is authoritative
      // (it is the one EMIS persists) and reconciles the rows at the end.
      const rowFetches = PROVIDERS.map(async (p) => {
        try {
          vm.rowSettled(await client.providerRow(student.id, p))
          render()
        } catch {
          /* the aggregate below still settles this row */
        }
      })
      try {
        const status = await client.verify(student.id)
        await Promise.allSettled(rowFetches)
        vm.verifyCompleted(status)
      } catch (e) {
        await Promise.allSettled(rowFetches)
        const err = e instanceof GatewayError ? e : new GatewayError('transport', String(e))
        vm.verifyFailed(`${err.kind}: ${err.message}`)
      }
      render()
    },

    async issue(programme: string): Promise<void> {
      const student = vm.view.student
      if (!student || !vm.canIssue) return
      vm.beginIssue()
      render()
      try {
        vm.issueSucceeded(await client.issueCertificate(student.id, programme))
      } catch (e) {
        const err = e instanceof GatewayError ? e : new GatewayError('transport', String(e))
        vm.issueRefused(err.kind, err.message)
      }
      render()
    },
  }

  el<HTMLButtonElement>('#cert-search-go').addEventListener('click', () => {
    void controller.search(el<HTMLInputElement>('#cert-search').value)
  })
  el<HTMLElement>('#cert-results').addEventListener('click', (ev: Event) => {
    const target = ev.target as HTMLElement
    const id = target.getAttribute('data-student')
    if (id) {
      ev.preventDefault()
      void controller.select(id)
    }
  })
  el<HTMLButtonElement>('#cert-verify').addEventListener('click', () => void controller.verify())
  el<HTMLButtonElement>('#cert-issue').addEventListener('click', () => {
    void controller.issue(el<HTMLSelectElement>('#cert-programme').value)
  })

  render()
  return controller
}
