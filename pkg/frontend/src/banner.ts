/** Dismissible notification banners shared by all views. */

export type BannerAction = {
  label: string;
  onClick: () => void;
};

export function showBanner(host: HTMLElement, message: string,
                           actions: BannerAction[] = []): HTMLElement {
  const banner = document.createElement('div');
  banner.className = 'banner';

  const text = document.createElement('span');
  text.className = 'banner-text';
  text.textContent = message;
  banner.appendChild(text);

  for (const action of actions) {
    const button = document.createElement('button');
    button.className = 'banner-action';
    button.textContent = action.label;
    button.addEventListener('click', () => {
      banner.remove();
      action.onClick();
    });
    banner.appendChild(button);
  }

  const dismiss = document.createElement('button');
  dismiss.className = 'banner-dismiss';
  dismiss.textContent = '×';
  dismiss.title = 'Dismiss';
  dismiss.addEventListener('click', () => banner.remove());
  banner.appendChild(dismiss);

  host.appendChild(banner);
  return banner;
}

export function clearBanners(host: HTMLElement): void {
  host.querySelectorAll('.banner').forEach((el) => el.remove());
}
