/** Application shell: project picker on top, one view below. */

import * as api from './api.js';
import { renderAnnotator } from './annotator.js';
import { showBanner } from './banner.js';
import { el, errorText } from './dom.js';
import { renderGallery } from './gallery.js';
import type { Session } from './session.js';
import { renderViewer } from './viewer.js';

export async function initApp(root: HTMLElement): Promise<void> {
  root.innerHTML = '';

  const topbar = el('header', 'topbar');
  topbar.appendChild(el('h1', 'app-title', 'Photo links'));
  const picker = el('select', 'project-picker');
  topbar.appendChild(picker);
  const createForm = el('form', 'project-create');
  const nameInput = el('input', 'project-name');
  nameInput.placeholder = 'New project name';
  const createButton = el('button', 'project-create-submit', 'Create');
  createButton.type = 'submit';
  createForm.append(nameInput, createButton);
  topbar.appendChild(createForm);

  const banners = el('div', 'banners');
  const view = el('main', 'view');
  root.append(topbar, banners, view);

  const session: Session = {
    projectId: '',
    banners,
    view,
    openGallery() { void renderGallery(session); },
    openAnnotator(a, b) { renderAnnotator(session, a, b); },
    openViewer(focusId) { void renderViewer(session, focusId); },
  };

  function showProjects(projects: api.ProjectSummary[]): void {
    picker.innerHTML = '';
    for (const project of projects) {
      const option = el('option', '', project.name || project.id);
      option.value = project.id;
      picker.appendChild(option);
    }
    if (session.projectId) picker.value = session.projectId;
  }

  picker.addEventListener('change', () => {
    session.projectId = picker.value;
    session.openGallery();
  });

  createForm.addEventListener('submit', (ev) => {
    ev.preventDefault();
    void api.createProject(nameInput.value.trim())
      .then(async (created) => {
        nameInput.value = '';
        session.projectId = created.id;
        showProjects(await api.listProjects());
        session.openGallery();
      })
      .catch((err) => {
        showBanner(banners, `Could not create the project: ${errorText(err)}`);
      });
  });

  try {
    const projects = await api.listProjects();
    showProjects(projects);
    if (projects.length > 0) {
      session.projectId = projects[0].id;
      picker.value = session.projectId;
      session.openGallery();
    } else {
      view.appendChild(el('p', 'empty-state',
                          'Create a project to begin.'));
    }
  } catch (err) {
    showBanner(banners, `Could not reach the service: ${errorText(err)}`);
  }
}

const rootEl = document.getElementById('app');
if (rootEl) void initApp(rootEl);
