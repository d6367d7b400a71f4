/** DOM scaffolding and synthetic input events shared by the view tests. */

import { vi } from 'vitest';

import type { Session } from '../src/session.js';

export type TestSession = Session & {
  openGallery: ReturnType<typeof vi.fn>;
  openAnnotator: ReturnType<typeof vi.fn>;
  openViewer: ReturnType<typeof vi.fn>;
};

export function makeSession(): TestSession {
  document.body.innerHTML = '';
  const banners = document.createElement('div');
  banners.className = 'banners';
  const view = document.createElement('main');
  view.className = 'view';
  document.body.append(banners, view);
  return {
    projectId: 'p1',
    banners,
    view,
    openGallery: vi.fn(),
    openAnnotator: vi.fn(),
    openViewer: vi.fn(),
  };
}

/** jsdom reports zero-sized boxes; pin one so coordinates mean something. */
export function stubRect(target: HTMLElement, width: number,
                         height: number): void {
  target.getBoundingClientRect = () => ({
    left: 0, top: 0, right: width, bottom: height,
    width, height, x: 0, y: 0, toJSON: () => ({}),
  } as DOMRect);
}

export function mouse(target: Element, type: string, x: number,
                      y: number): void {
  target.dispatchEvent(new MouseEvent(type, {
    clientX: x, clientY: y, bubbles: true, cancelable: true,
  }));
}

export function click(target: Element, x: number, y: number): void {
  mouse(target, 'mousedown', x, y);
  mouse(target, 'mouseup', x, y);
}

export function dragMouse(target: Element, fromX: number, fromY: number,
                          toX: number, toY: number): void {
  mouse(target, 'mousedown', fromX, fromY);
  mouse(target, 'mousemove', (fromX + toX) / 2, (fromY + toY) / 2);
  mouse(target, 'mousemove', toX, toY);
  mouse(target, 'mouseup', toX, toY);
}

export function wheel(target: Element, x: number, y: number,
                      deltaY: number): void {
  target.dispatchEvent(new WheelEvent('wheel', {
    clientX: x, clientY: y, deltaY, bubbles: true, cancelable: true,
  }));
}

export function bannerTexts(banners: HTMLElement): string[] {
  return [...banners.querySelectorAll('.banner-text')]
    .map((node) => node.textContent ?? '');
}

export function submitForm(form: HTMLFormElement): void {
  form.dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }));
}
