import { GatewayClient } from './client.js'
import { mountCertificatePage } from './certificate.js'
import { mountRegisterPage } from './register.js'

const client = new GatewayClient('')

const registerRoot = document.getElementById('register-page')!
const certificateRoot = document.getElementById('certificate-page')!

mountRegisterPage(registerRoot, client)
mountCertificatePage(certificateRoot, client)

// Simple two-page nav.
const pages: Record<string, HTMLElement> = {
  register: registerRoot,
  certificate: certificateRoot,
}
for (const button of Array.from(document.querySelectorAll('nav button[data-page]'))) {
  button.addEventListener('click', () => {
    const chosen = button.getAttribute('data-page')!
    for (const [name, page] of Object.entries(pages)) page.hidden = name !== chosen
    for (const other of Array.from(document.querySelectorAll('nav button[data-page]'))) {
      other.classList.toggle('active', other === button)
    }
  })
}

// Deployed-services health strip, refreshed periodically.
async function refreshHealth(): Promise<void> {
  const strip = document.getElementById('health')!
  try {
    const entries = await client.registry()
    strip.innerHTML = entries
      .map((e) => `<span class="svc ok" title="${e.endpoint}">${e.name}</span>`)
      .join(' ')
  } catch {
    strip.innerHTML = '<span class="svc unknown">registry unreachable</span>'
  }
}
void refreshHealth()
setInterval(() => void refreshHealth(), 5_000)
