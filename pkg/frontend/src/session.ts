/**
 * Navigation state shared by the views. Holds nothing authoritative:
 * which project is open and where to go next, never project data. Each
 * view re-fetches what it shows, so a page reload lands in the same
 * place with the same content.
 */

import type { ImageRecord } from './api.js';

export type Session = {
  projectId: string;
  banners: HTMLElement;
  view: HTMLElement;
  openGallery(): void;
  openAnnotator(a: ImageRecord, b: ImageRecord): void;
  openViewer(focusId: string): void;
};
