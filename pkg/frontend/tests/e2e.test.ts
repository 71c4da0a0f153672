/**
 * End-to-end: drives the two console pages (in a happy-dom browser) against
 * the real backend processes, replaying the demo flow: register + enrol via
 * the registration page, borrow a book via the CLI, verify on the
 * certificate page (blocked on library dues), return the book via the CLI,
 * re-verify (clear), record the exam result via the CLI, then issue the
 * certificate from the page and read its serial.
 */
import { ChildProcess, spawn, spawnSync } from 'node:child_process'
import { mkdtempSync, rmSync } from 'node:fs'
import net from 'node:net'
import { tmpdir } from 'node:os'
import path from 'node:path'
import { fileURLToPath } from 'node:url'
import { Window } from 'happy-dom'
import { afterAll, beforeAll, describe, expect, it } from 'vitest'

import { GatewayClient } from '../src/client.js'
import { mountCertificatePage } from '../src/certificate.js'
import { mountRegisterPage } from '../src/register.js'

const REPO = path.resolve(path.dirname(fileURLToPath(import.meta.url)), '..', '..')
const FIXTURE = path.join(REPO, 'fixtures', 'uos-demo')
const SYSTEM_WSDD = path.join(REPO, 'fixtures', 'wsdd', 'system.wsdd')

const NEW_STUDENT = {
  id: 'S-2024-0013',
  first_name: 'Mahnoor',
  last_name: 'Abbasi',
  address: 'University Colony, Jamshoro',
  contact_number: '0300-2000013',
  faculty: 'Natural Sciences',
  department: 'IMCS',
  degree_program: 'BSCS',
  graduation_batch_year: 2024,
}

function freePort(): Promise<number> {
  return new Promise((resolve) => {
    const srv = net.createServer()
    srv.listen(0, '127.0.0.1', () => {
      const port = (srv.address() as net.AddressInfo).port
      srv.close(() => resolve(port))
    })
  })
}

async function waitHttp(url: string, timeoutMs = 15_000): Promise<void> {
  const deadline = Date.now() + timeoutMs
  let last: unknown
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(url)
      if (resp.ok) return
    } catch (e) {
      last = e
    }
    await new Promise((r) => setTimeout(r, 100))
  }
  throw new Error(`${url} did not come up: ${last}`)
}

let runDir: string
let brokerUrl: string
let serveUrl: string
const procs: ChildProcess[] = []

function cli(args: string[]): void {
  const result = spawnSync('python3', ['-m', 'i3.cli', ...args], {
    cwd: REPO,
    env: { ...process.env, I3_BROKER_URL: brokerUrl },
    encoding: 'utf-8',
  })
  if (result.status !== 0) {
    throw new Error(`i3 ${args.join(' ')} -> ${result.status}\n${result.stdout}\n${result.stderr}`)
  }
}

function startProcess(args: string[]): ChildProcess {
  const child = spawn('python3', ['-m', 'i3.cli', ...args], { cwd: REPO, stdio: 'ignore' })
  procs.push(child)
  return child
}

beforeAll(async () => {
  runDir = mkdtempSync(path.join(tmpdir(), 'i3-console-e2e-'))
  const storeDir = path.join(runDir, 'stores')
  const brokerPort = await freePort()
  const servePort = await freePort()
  brokerUrl = `http://127.0.0.1:${brokerPort}`
  serveUrl = `http://127.0.0.1:${servePort}`

  cli(['seed', '--fixture', FIXTURE, '--store-dir', storeDir])
  startProcess(['broker', '--port', String(brokerPort)])
  await waitHttp(`${brokerUrl}/health`)
  startProcess([
    'serve',
    '--port',
    String(servePort),
    '--store-dir',
    storeDir,
    '--broker',
    brokerUrl,
    '--wsdd',
    SYSTEM_WSDD,
  ])
  await waitHttp(`${serveUrl}/health`)
}, 60_000)

afterAll(() => {
  for (const p of procs) p.kill()
  if (runDir) rmSync(runDir, { recursive: true, force: true })
})

describe('registrar console against live services', () => {
  it('walks a student from registration to an issued certificate', async () => {
    const window = new Window({ url: serveUrl })
    const document = window.document
    document.body.innerHTML =
      '<section id="register-page"></section><section id="certificate-page"></section>'
    const client = new GatewayClient(serveUrl, (...args) => fetch(...args))

    // Registration page: register + enrol in one submit.
    const registerRoot = document.getElementById('register-page')!
    const register = mountRegisterPage(registerRoot as unknown as Element, client, 2026)
    register.fillForm(NEW_STUDENT)
    await register.submit()
    const banner = registerRoot.querySelector('#reg-banner')!
    expect(banner.textContent).toContain('S-2024-0013')

    // Duplicate submission keeps the form and flags the id field inline.
    register.fillForm(NEW_STUDENT)
    await register.submit()
    expect(registerRoot.querySelector('[data-error-for="id"]')!.textContent).toContain(
      'already registered',
    )
    expect(
      (registerRoot.querySelector('input[name="first_name"]') as unknown as { value: string })
        .value,
    ).toBe('Mahnoor')

    // Certificate page: find and select the student.
    const certRoot = document.getElementById('certificate-page')!
    const cert = mountCertificatePage(certRoot as unknown as Element, client)
    const hits = await cert.search('Mahnoor')
    expect(hits.map((h) => h.id)).toContain('S-2024-0013')
    await cert.select('S-2024-0013')

    // Borrow a book through the CLI, then verify: blocked on library dues.
    cli([
      'call', '--service', 'LibraryDataBaseManagerService', '--method', 'issueBook',
      '--arg', 's:B-0001', '--arg', 's:S-2024-0013',
    ])
    await cert.verify()
    expect(cert.vm.view.overall).toBe('Blocked')
    const libraryRow = certRoot.querySelector('tr[data-provider="Library"]')!
    expect(libraryRow.getAttribute('class')).toBe('dues')
    expect(libraryRow.textContent).toContain('B-0001')
    expect(cert.vm.canIssue).toBe(false)
    expect((certRoot.querySelector('#cert-issue-row') as unknown as { hidden: boolean }).hidden).toBe(true)

    // Return the book via the CLI and re-verify: the row flips to Clear.
    cli([
      'call', '--service', 'LibraryDataBaseManagerService', '--method', 'returnBook',
      '--arg', 's:B-0001',
    ])
    await cert.verify()
    expect(cert.vm.view.overall).toBe('Clear')
    expect(certRoot.querySelector('tr[data-provider="Library"]')!.getAttribute('class')).toBe('ok')

    // Clear, but no Passed exam yet: issuing stays disabled.
    expect(cert.vm.canIssue).toBe(false)

    cli([
      'call', '--service', 'ExaminationDataBaseManagerService', '--method', 'recordResult',
      '--arg', 's:S-2024-0013', '--arg', 's:BSCS', '--arg', 's:Passed',
    ])
    await cert.refreshExams()
    expect(cert.vm.canIssue).toBe(true)
    expect(
      (certRoot.querySelector('#cert-issue') as unknown as { disabled: boolean }).disabled,
    ).toBe(false)

    await cert.issue('BSCS')
    expect(cert.vm.view.certificate).not.toBeNull()
    expect(cert.vm.view.certificate!.serial).toMatch(/^C-\d{4}-\d{6}$/)
    expect(certRoot.querySelector('#cert-result')!.textContent).toContain(
      cert.vm.view.certificate!.serial,
    )

    // Idempotent re-issue returns the same serial.
    const serial = cert.vm.view.certificate!.serial
    await cert.verify()
    await cert.issue('BSCS')
    expect(cert.vm.view.certificate!.serial).toBe(serial)

    window.close()
  }, 60_000)

  it('streams provider rows independently of the aggregate', async () => {
    const window = new Window({ url: serveUrl })
    const document = window.document
    document.body.innerHTML = '<section id="certificate-page"></section>'
    const client = new GatewayClient(serveUrl, (...args) => fetch(...args))
    const certRoot = document.getElementById('certificate-page')!
    const cert = mountCertificatePage(certRoot as unknown as Element, client)
    await cert.select('S-2021-0004')

    const row = await client.providerRow('S-2021-0004', 'Hostel')
    expect(row.provider).toBe('Hostel')
    expect(row.verdict).toBe('Clear')

    await cert.verify()
    expect(cert.vm.view.overall).toBe('Clear')
    window.close()
  }, 30_000)
})
