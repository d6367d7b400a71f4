import { beforeEach, describe, expect, it, vi } from 'vitest';

import { initApp } from '../src/main.js';
import { FakeService, tick } from './fake_service.js';

let fake: FakeService;

beforeEach(() => {
  fake = new FakeService();
  fake.install();
  document.body.innerHTML = '<div id="app"></div>';
});

function picker(): HTMLSelectElement {
  return document.querySelector('select.project-picker') as HTMLSelectElement;
}

describe('startup', () => {
  it('boots into the gallery of the first project', async () => {
    fake.addImage({ id: 'img1' });
    await initApp(document.getElementById('app')!);
    await tick();

    expect([...picker().options].map((option) => option.value))
      .toEqual(['p1']);
    expect(picker().value).toBe('p1');
    expect(document.querySelector('main.view.gallery')).not.toBeNull();
    expect(document.querySelectorAll('.tile')).toHaveLength(1);
  });

  it('asks for a project when none exist yet', async () => {
    vi.stubGlobal('fetch', async () =>
      new Response('[]', { headers: { 'Content-Type': 'application/json' } }));
    await initApp(document.getElementById('app')!);
    expect(document.querySelector('.empty-state')!.textContent)
      .toBe('Create a project to begin.');
  });
});

describe('project creation', () => {
  it('creates, selects and opens the new project', async () => {
    fake.addImage({ id: 'img1' });
    await initApp(document.getElementById('app')!);
    await tick();

    const nameInput =
      document.querySelector('input.project-name') as HTMLInputElement;
    nameInput.value = '  alameda 1910  ';
    (document.querySelector('form.project-create') as HTMLFormElement)
      .dispatchEvent(new Event('submit', { bubbles: true, cancelable: true }));
    await tick();
    await tick();

    const posts = fake.requestsTo('/projects')
      .filter((entry) => entry.method === 'POST');
    expect(posts).toHaveLength(1);
    expect(posts[0].body).toBe('{"name":"alameda 1910"}');

    expect([...picker().options].map((option) => option.value))
      .toEqual(['p1', 'p2']);
    expect(picker().value).toBe('p2');
    expect(nameInput.value).toBe('');
    expect(document.querySelector('.empty-state')!.textContent)
      .toContain('No photographs yet');
  });

  it('switches projects from the picker', async () => {
    fake.addImage({ id: 'img1' });
    fake.otherProjects.push(
      { id: 'p2', name: 'other', image_count: 0, link_count: 0 });
    await initApp(document.getElementById('app')!);
    await tick();

    picker().value = 'p2';
    picker().dispatchEvent(new Event('change', { bubbles: true }));
    await tick();

    expect(fake.requestsTo('/projects/p2')).toHaveLength(1);
    expect(document.querySelector('.empty-state')!.textContent)
      .toContain('No photographs yet');
  });
});
