import { afterEach, beforeEach, describe, expect, it, vi } from 'vitest';

import { JOB_POLL_MS, renderGallery } from '../src/gallery.js';
import { FakeService, tick } from './fake_service.js';
import { bannerTexts, makeSession, submitForm,
         type TestSession } from './helpers.js';

let fake: FakeService;
let session: TestSession;

beforeEach(() => {
  fake = new FakeService();
  fake.install();
  session = makeSession();
});

afterEach(() => {
  vi.useRealTimers();
});

function clusterTitles(): string[] {
  return [...session.view.querySelectorAll('section.group:not(.ungrouped) .group-title')]
    .map((node) => node.textContent ?? '');
}

function tray(): HTMLElement | null {
  return session.view.querySelector('section.ungrouped');
}

describe('layout', () => {
  it('renders one cluster per group and a tray for singletons', async () => {
    for (let i = 1; i <= 8; i++) fake.addImage({ id: `img${i}` });
    fake.groups = [['img1', 'img2'], ['img3', 'img4', 'img5'],
                   ['img6', 'img7'], ['img8']];
    await renderGallery(session);

    expect(clusterTitles()).toEqual(
      ['g1 (2 photos)', 'g2 (3 photos)', 'g3 (2 photos)']);
    expect(tray()!.querySelector('.group-title')!.textContent)
      .toBe('Ungrouped (1 photo)');
    expect(tray()!.querySelectorAll('.tile')).toHaveLength(1);
    expect(session.view.querySelectorAll('.tile')).toHaveLength(8);
  });

  it('prompts for an upload when the project is empty', async () => {
    await renderGallery(session);
    expect(session.view.querySelector('.empty-state')!.textContent)
      .toContain('Upload a scan');
    expect(session.view.querySelector('form.upload')).not.toBeNull();
  });

  it('shows capture dates on the tiles', async () => {
    fake.addImage({ id: 'img1', capture_date: '1900-01-01' });
    fake.addImage({ id: 'img2' });
    await renderGallery(session);
    const dates = [...session.view.querySelectorAll('.tile-date')]
      .map((node) => node.textContent);
    expect(dates).toEqual(['1900-01-01', 'undated']);
  });
});

describe('pair selection', () => {
  it('opens the annotator once two tiles are selected', async () => {
    fake.addImage({ id: 'img1' });
    fake.addImage({ id: 'img2' });
    await renderGallery(session);

    const tiles = [...session.view.querySelectorAll('.tile')] as HTMLElement[];
    tiles[0].click();
    expect(tiles[0].classList.contains('selected')).toBe(true);
    expect(session.openAnnotator).not.toHaveBeenCalled();

    tiles[1].click();
    expect(session.openAnnotator).toHaveBeenCalledTimes(1);
    const [first, second] = session.openAnnotator.mock.calls[0];
    expect(first.id).toBe('img1');
    expect(second.id).toBe('img2');
  });

  it('clicking a selected tile deselects it', async () => {
    fake.addImage({ id: 'img1' });
    fake.addImage({ id: 'img2' });
    await renderGallery(session);

    const tiles = [...session.view.querySelectorAll('.tile')] as HTMLElement[];
    tiles[0].click();
    tiles[0].click();
    expect(tiles[0].classList.contains('selected')).toBe(false);
    tiles[1].click();
    expect(session.openAnnotator).not.toHaveBeenCalled();
  });

  it('the focus button opens the viewer, not the selection', async () => {
    fake.addImage({ id: 'img1' });
    await renderGallery(session);

    const tile = session.view.querySelector('.tile') as HTMLElement;
    (tile.querySelector('button.tile-focus') as HTMLElement).click();
    expect(session.openViewer).toHaveBeenCalledWith('img1');
    expect(tile.classList.contains('selected')).toBe(false);
    expect(session.openAnnotator).not.toHaveBeenCalled();
  });
});

describe('automatic grouping', () => {
  it('reflects the merged groups in place once the job finishes',
     async () => {
    fake.addImage({ id: 'img1' });
    fake.addImage({ id: 'img2' });
    fake.jobQueue = [
      { id: 'job1', project: 'p1', status: 'running' },
      {
        id: 'job1', project: 'p1', status: 'done',
        result: {
          groups: [{ id: 'g1', members: ['img1', 'img2'] }],
          verified_pairs: [{ a: 'img1', b: 'img2', inliers: 37 }],
        },
      },
    ];
    vi.useFakeTimers();
    await renderGallery(session);
    expect(clusterTitles()).toEqual([]);
    expect(tray()!.querySelectorAll('.tile')).toHaveLength(2);

    const rootBefore = session.view;
    const button =
      session.view.querySelector('button.autogroup') as HTMLButtonElement;
    button.click();
    await vi.advanceTimersByTimeAsync(0);
    expect(button.disabled).toBe(true);
    expect(button.textContent).toBe('Grouping...');

    await vi.advanceTimersByTimeAsync(JOB_POLL_MS);
    await vi.advanceTimersByTimeAsync(0);

    // same document, same view element, repainted in place
    expect(session.view).toBe(rootBefore);
    expect(clusterTitles()).toEqual(['g1 (2 photos)']);
    expect(tray()).toBeNull();
    expect(fake.requestsTo('/projects/p1/jobs/job1')).toHaveLength(2);
    expect(fake.requestsTo('/projects/p1/groups')).toHaveLength(2);
  });

  it('reports a failed job and re-enables the button', async () => {
    fake.addImage({ id: 'img1' });
    fake.jobQueue = [{
      id: 'job1', project: 'p1', status: 'failed',
      error: { code: 'autogroup_failed', message: 'not enough features',
               entity: null },
    }];
    await renderGallery(session);

    const button =
      session.view.querySelector('button.autogroup') as HTMLButtonElement;
    button.click();
    await tick();
    await tick();

    expect(bannerTexts(session.banners))
      .toEqual(['Automatic grouping failed: not enough features']);
    expect(button.disabled).toBe(false);
    expect(button.textContent).toBe('Auto-group');
  });

  it('reports a grouping job that is already running', async () => {
    fake.addImage({ id: 'img1' });
    fake.autogroupBusy = true;
    await renderGallery(session);

    const button =
      session.view.querySelector('button.autogroup') as HTMLButtonElement;
    button.click();
    await tick();

    expect(bannerTexts(session.banners)[0])
      .toContain('Automatic grouping failed');
    expect(button.disabled).toBe(false);
  });
});

describe('uploads', () => {
  it('posts the scan and repaints the gallery', async () => {
    await renderGallery(session);

    const form = session.view.querySelector('form.upload') as HTMLFormElement;
    const fileInput =
      form.querySelector('input[type="file"]') as HTMLInputElement;
    const file = new File(['scan'], 'plaza.png', { type: 'image/png' });
    Object.defineProperty(fileInput, 'files', { value: [file] });
    const dateInput =
      form.querySelector('input[type="date"]') as HTMLInputElement;
    dateInput.value = '1900-01-01';

    submitForm(form);
    await tick();
    await tick();

    expect(fake.images).toHaveLength(1);
    expect(fake.images[0].capture_date).toBe('1900-01-01');
    expect(session.view.querySelectorAll('.tile')).toHaveLength(1);
  });

  it('asks for a file before uploading', async () => {
    await renderGallery(session);
    submitForm(session.view.querySelector('form.upload') as HTMLFormElement);
    expect(bannerTexts(session.banners))
      .toEqual(['Choose a file to upload first.']);
    expect(fake.requestsTo('/projects/p1/images')).toHaveLength(0);
  });
});

describe('failures', () => {
  it('surfaces load errors as a dismissible banner', async () => {
    fake.addImage({ id: 'img1' });
    fake.failures.set('GET /projects/p1/groups',
                      { status: 500, code: 'internal_error',
                        message: 'boom' });
    await renderGallery(session);

    const banner = session.banners.querySelector('.banner') as HTMLElement;
    expect(banner.textContent).toContain('Could not load the project: boom');
    (banner.querySelector('.banner-dismiss') as HTMLElement).click();
    expect(session.banners.querySelector('.banner')).toBeNull();
  });
});
