/**
 * Focus viewer: shows the server-rendered composite centered on one
 * photograph, with a timeline slider over the distinct capture dates in
 * its group. Moving the slider re-requests the render filtered to that
 * date; only the newest in-flight request ever reaches the screen.
 */

import * as api from './api.js';
import { showBanner } from './banner.js';
import { el, errorText } from './dom.js';
import type { Session } from './session.js';

function isAbort(err: unknown): boolean {
  return err instanceof Error && err.name === 'AbortError';
}

export async function renderViewer(session: Session,
                                   focusId: string): Promise<void> {
  let detail: api.ProjectDetail;
  let groups: api.Group[];
  try {
    [detail, groups] = await Promise.all([
      api.getProject(session.projectId),
      api.getGroups(session.projectId),
    ]);
  } catch (err) {
    showBanner(session.banners, `Could not load the project: ${errorText(err)}`);
    return;
  }

  const byId = new Map(detail.images.map((record) => [record.id, record]));
  const focus = byId.get(focusId);
  const group = groups.find((g) => g.members.includes(focusId));
  if (!focus || !group) {
    showBanner(session.banners,
               `Photograph ${focusId} is gone; returning to the groups.`);
    session.openGallery();
    return;
  }

  const members = group.members.flatMap((id) => byId.get(id) ?? []);
  const dates = [...new Set(members.map((record) => record.capture_date)
    .filter((stamp): stamp is string => stamp !== null))].sort();

  const root = session.view;
  root.innerHTML = '';
  root.className = 'view viewer';

  const header = el('div', 'viewer-header');
  header.appendChild(el('h2', 'viewer-title',
                        `Focus on ${focus.title ?? focus.id}`));
  const back = el('button', 'back', 'Back to groups');
  back.addEventListener('click', () => session.openGallery());
  header.appendChild(back);
  root.appendChild(header);

  const output = el('img', 'render-output');
  output.alt = `Composite centered on ${focus.title ?? focus.id}`;
  root.appendChild(output);

  const dateLabel = el('p', 'date-label', 'all dates');

  let seq = 0;
  let controller: AbortController | null = null;
  let shownUrl: string | null = null;

  async function show(date?: string): Promise<void> {
    const mine = ++seq;
    controller?.abort();
    controller = new AbortController();
    dateLabel.textContent = date ?? 'all dates';
    try {
      const blob = await api.fetchRender(session.projectId, focusId,
                                         { date, signal: controller.signal });
      if (mine !== seq) return; // a newer request superseded this one
      if (shownUrl) URL.revokeObjectURL(shownUrl);
      shownUrl = URL.createObjectURL(blob);
      output.src = shownUrl;
    } catch (err) {
      if (mine !== seq || isAbort(err)) return;
      if (err instanceof api.ApiError && err.status === 404) {
        showBanner(session.banners,
                   `The focus view is gone (${err.message}); `
                   + 'returning to the groups.');
        session.openGallery();
        return;
      }
      showBanner(session.banners, `Render failed: ${errorText(err)}`);
    }
  }

  // a lone photograph has no timeline to walk
  if (members.length > 1 && dates.length > 0) {
    const timeline = el('div', 'timeline');
    timeline.appendChild(el('span', 'timeline-edge', dates[0]));
    const slider = el('input', 'date-slider');
    slider.type = 'range';
    slider.min = '0';
    slider.max = String(dates.length - 1);
    slider.step = '1';
    slider.value = String(dates.length - 1);
    slider.addEventListener('input', () => {
      void show(dates[Number(slider.value)]);
    });
    timeline.appendChild(slider);
    timeline.appendChild(el('span', 'timeline-edge', dates[dates.length - 1]));
    timeline.appendChild(dateLabel);
    root.appendChild(timeline);
  }

  if (members.length > 1) {
    const strip = el('div', 'neighbors');
    strip.appendChild(el('span', 'neighbors-label', 'In this group:'));
    for (const record of members) {
      const button = el('button', 'neighbor', record.title ?? record.id);
      if (record.id === focusId) {
        button.disabled = true;
        button.classList.add('current');
      } else {
        button.addEventListener('click', () => session.openViewer(record.id));
      }
      strip.appendChild(button);
    }
    root.appendChild(strip);
  }

  await show();
}
