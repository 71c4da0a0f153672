import { GatewayClient } from './client.js'
import { GatewayError, StudentJson } from './types.js'
import { validateRegistration } from './viewmodel.js'

const FIELDS: Array<{ name: keyof StudentJson; label: string }> = [
  { name: 'id', label: 'Student id (S-YYYY-NNNN)' },
  { name: 'first_name', label: 'First name' },
  { name: 'last_name', label: 'Last name' },
  { name: 'address', label: 'Address' },
  { name: 'contact_number', label: 'Contact number' },
  { name: 'faculty', label: 'Faculty' },
  { name: 'department', label: 'Department' },
  { name: 'degree_program', label: 'Degree programme' },
  { name: 'graduation_batch_year', label: 'Graduation batch year' },
]

const UNAVAILABLE_KINDS = new Set([
  'transport',
  'AmisUnavailable',
  'Server.Unavailable',
  'Server.NoSuchService',
])

export interface RegisterController {
  submit(): Promise<void>
  readForm(): StudentJson
  fillForm(form: Partial<StudentJson>): void
}

function esc(s: unknown): string {
  return String(s).replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;')
}

export function mountRegisterPage(
  root: Element,
  client: GatewayClient,
  currentYear?: number,
): RegisterController {
  root.innerHTML = `
    <h2>Student registration</h2>
    <p class="hint">Registers the student with admissions, then enrols them as a library member.</p>
    <div class="banner" id="reg-banner" hidden></div>
    <form id="reg-form">
      ${FIELDS.map(
        (f) => `
        <label>${f.label}
          <input name="${f.name}" autocomplete="off">
          <span class="field-error" data-error-for="${f.name}"></span>
        </label>`,
      ).join('')}
      <button type="submit" id="reg-submit">Register</button>
    </form>`

  const doc = root.ownerDocument
  const form = root.querySelector('#reg-form') as HTMLFormElement
  const banner = root.querySelector('#reg-banner') as HTMLElement

  const controller: RegisterController = {
    readForm(): StudentJson {
      const value = (name: string) =>
        (root.querySelector(`input[name="${name}"]`) as HTMLInputElement).value
      return {
        id: value('id').trim(),
        first_name: value('first_name'),
        last_name: value('last_name'),
        address: value('address'),
        contact_number: value('contact_number'),
        faculty: value('faculty'),
        department: value('department'),
        degree_program: value('degree_program'),
        graduation_batch_year: Number(value('graduation_batch_year') || 'NaN'),
      }
    },

    fillForm(values: Partial<StudentJson>): void {
      for (const [name, value] of Object.entries(values)) {
        const input = root.querySelector(`input[name="${name}"]`) as HTMLInputElement | null
        if (input) input.value = String(value)
      }
    },

    async submit(): Promise<void> {
      banner.hidden = true
      banner.className = 'banner'
      for (const el of Array.from(root.querySelectorAll('.field-error'))) el.textContent = ''

      const data = controller.readForm()
      const errors = validateRegistration(data, currentYear)
      if (Object.keys(errors).length > 0) {
        for (const [field, message] of Object.entries(errors)) {
          const slot = root.querySelector(`[data-error-for="${field}"]`)
          if (slot) slot.textContent = message as string
        }
        return
      }

      try {
        const created = await client.registerStudent(data)
        await client.enrollMember(created.id)
        banner.hidden = false
        banner.classList.add('ok')
        banner.textContent = `Registered and enrolled: ${created.id}`
        form.reset()
      } catch (e) {
        const err = e instanceof GatewayError ? e : new GatewayError('transport', String(e))
        banner.hidden = false
        banner.classList.add('error')
        if (err.kind === 'DuplicateId') {
          // Attributable to the id field; the form is preserved for correction.
          const slot = root.querySelector('[data-error-for="id"]')
          if (slot) slot.textContent = `already registered (${esc(err.message)})`
          banner.textContent = 'Registration rejected: duplicate id.'
        } else if (UNAVAILABLE_KINDS.has(err.kind)) {
          banner.textContent = 'Admissions unavailable; nothing was saved. Try again later.'
        } else {
          banner.textContent = `Registration failed: ${esc(err.kind)}: ${esc(err.message)}`
        }
      }
    },
  }

  form.addEventListener('submit', (ev: Event) => {
    ev.preventDefault()
    void controller.submit()
  })
  void doc
  return controller
}
