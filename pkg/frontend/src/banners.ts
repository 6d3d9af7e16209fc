/** Dismissible error banners; API failures surface here instead of crashing. */

export class BannerArea {
  readonly el: HTMLElement;

  constructor() {
    this.el = document.createElement('div');
    this.el.className = 'banners';
  }

  show(code: string, message: string): void {
    const banner = document.createElement('div');
    banner.className = 'banner';
    banner.setAttribute('data-code', code);

    const text = document.createElement('span');
    text.textContent = `${code}: ${message}`;
    banner.appendChild(text);

    const dismiss = document.createElement('button');
    dismiss.className = 'banner-dismiss';
    dismiss.textContent = '×';
    dismiss.setAttribute('aria-label', 'dismiss');
    dismiss.addEventListener('click', () => banner.remove());
    banner.appendChild(dismiss);

    this.el.appendChild(banner);
  }

  clear(): void {
    this.el.replaceChildren();
  }
}
