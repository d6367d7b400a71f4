/**
 * Group gallery: one cluster of thumbnails per linked group, singletons
 * in an ungrouped tray. Selecting two images opens the pair annotator;
 * the auto-group button starts the background job and refreshes the
 * gallery in place once it finishes.
 */

import * as api from './api.js';
import { showBanner } from './banner.js';
import { el, errorText } from './dom.js';
import type { Session } from './session.js';

export const JOB_POLL_MS = 250;

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

function imageTile(record: api.ImageRecord, session: Session,
                   onSelect: (record: api.ImageRecord,
                              tile: HTMLElement) => void): HTMLElement {
  const tile = el('figure', 'tile');
  tile.dataset.image = record.id;

  const thumb = el('img', 'thumb') as HTMLImageElement;
  thumb.src = record.file;
  thumb.alt = record.title ?? record.id;
  tile.appendChild(thumb);

  const caption = el('figcaption', 'tile-caption');
  caption.appendChild(el('span', 'tile-id', record.title ?? record.id));
  caption.appendChild(el('span', 'tile-date',
                         record.capture_date ?? 'undated'));
  tile.appendChild(caption);

  const focusButton = el('button', 'tile-focus', 'Focus');
  focusButton.title = 'Open the focus view for this photograph';
  focusButton.addEventListener('click', (ev) => {
    ev.stopPropagation();
    session.openViewer(record.id);
  });
  tile.appendChild(focusButton);

  tile.addEventListener('click', () => onSelect(record, tile));
  return tile;
}

function groupSection(title: string, members: api.ImageRecord[],
                      session: Session,
                      onSelect: (record: api.ImageRecord,
                                 tile: HTMLElement) => void): HTMLElement {
  const section = el('section', 'group');
  const label = members.length === 1 ? 'photo' : 'photos';
  section.appendChild(el('h3', 'group-title',
                         `${title} (${members.length} ${label})`));
  const grid = el('div', 'group-grid');
  for (const record of members) {
    grid.appendChild(imageTile(record, session, onSelect));
  }
  section.appendChild(grid);
  return section;
}

function uploadForm(session: Session): HTMLElement {
  const form = el('form', 'upload');

  const fileInput = el('input') as HTMLInputElement;
  fileInput.type = 'file';
  fileInput.name = 'photo';
  form.appendChild(fileInput);

  const dateInput = el('input') as HTMLInputElement;
  dateInput.type = 'date';
  dateInput.name = 'capture_date';
  dateInput.title = 'Capture date, if known';
  form.appendChild(dateInput);

  const submit = el('button', 'upload-submit', 'Upload');
  submit.type = 'submit';
  form.appendChild(submit);

  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const file = fileInput.files?.[0];
    if (!file) {
      showBanner(session.banners, 'Choose a file to upload first.');
      return;
    }
    submit.disabled = true;
    void api.uploadImage(session.projectId, file, dateInput.value || undefined)
      .then(() => renderGallery(session))
      .catch((err) => {
        submit.disabled = false;
        showBanner(session.banners, `Upload failed: ${errorText(err)}`);
      });
  });
  return form;
}

async function runAutogroup(session: Session,
                            button: HTMLButtonElement): Promise<void> {
  button.disabled = true;
  const idle = button.textContent;
  button.textContent = 'Grouping...';
  try {
    const started = await api.startAutogroup(session.projectId);
    let job = await api.getJob(session.projectId, started.id);
    while (job.status === 'running') {
      await delay(JOB_POLL_MS);
      job = await api.getJob(session.projectId, job.id);
    }
    if (job.status === 'failed') {
      const why = job.error ? job.error.message : 'unknown error';
      showBanner(session.banners, `Automatic grouping failed: ${why}`);
      button.disabled = false;
      button.textContent = idle;
      return;
    }
    // repaint in place; the fresh fetch picks up the merged groups
    await renderGallery(session);
  } catch (err) {
    showBanner(session.banners, `Automatic grouping failed: ${errorText(err)}`);
    button.disabled = false;
    button.textContent = idle;
  }
}

export async function renderGallery(session: Session): Promise<void> {
  const root = session.view;

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

  root.innerHTML = '';
  root.className = 'view gallery';

  const toolbar = el('div', 'toolbar');
  toolbar.appendChild(el('h2', 'project-title',
                         detail.name || detail.id));
  const autogroupButton = el('button', 'autogroup', 'Auto-group');
  autogroupButton.title = 'Find matching photographs automatically';
  autogroupButton.addEventListener('click', () => {
    void runAutogroup(session, autogroupButton);
  });
  toolbar.appendChild(autogroupButton);
  toolbar.appendChild(uploadForm(session));
  root.appendChild(toolbar);

  if (detail.images.length === 0) {
    root.appendChild(el('p', 'empty-state',
                        'No photographs yet. Upload a scan to begin.'));
    return;
  }

  root.appendChild(el('p', 'hint',
                      'Click two photographs to link them by hand.'));

  const byId = new Map(detail.images.map((record) => [record.id, record]));
  const selected: { record: api.ImageRecord; tile: HTMLElement }[] = [];
  const onSelect = (record: api.ImageRecord, tile: HTMLElement) => {
    const at = selected.findIndex((entry) => entry.record.id === record.id);
    if (at >= 0) {
      selected[at].tile.classList.remove('selected');
      selected.splice(at, 1);
      return;
    }
    selected.push({ record, tile });
    tile.classList.add('selected');
    if (selected.length === 2) {
      session.openAnnotator(selected[0].record, selected[1].record);
    }
  };

  const members = (group: api.Group) =>
    group.members.flatMap((id) => byId.get(id) ?? []);

  const clusters = groups.filter((group) => group.members.length > 1);
  for (const group of clusters) {
    root.appendChild(groupSection(group.id, members(group), session, onSelect));
  }

  const singles = groups.filter((group) => group.members.length === 1)
    .flatMap(members);
  if (singles.length > 0) {
    const tray = groupSection('Ungrouped', singles, session, onSelect);
    tray.classList.add('ungrouped');
    root.appendChild(tray);
  }
}
