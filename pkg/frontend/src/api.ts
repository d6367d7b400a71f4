/**
 * Typed client for the registration service. Every call maps to one
 * documented endpoint; nothing is cached here, so a view rebuilt from
 * these responses always reflects the server's current state.
 */

export type Point = [number, number];

export type ProjectSummary = {
  id: string;
  name: string;
  image_count: number;
  link_count: number;
};

export type ImageRecord = {
  id: string;
  width: number;
  height: number;
  capture_date: string | null;
  title: string | null;
  file: string;
};

export type LinkRecord = {
  id: string;
  a: string;
  b: string;
  origin: 'manual' | 'auto';
  quad_a?: Point[];
  quad_b?: Point[];
  pairs?: number[][];
  homography: number[];
};

export type ProjectDetail = {
  id: string;
  name: string;
  images: ImageRecord[];
  links: LinkRecord[];
};

export type Group = {
  id: string;
  members: string[];
};

export type JobError = {
  code: string;
  message: string;
  entity: string | null;
};

export type Job = {
  id: string;
  project: string;
  status: 'running' | 'done' | 'failed';
  result?: {
    groups: Group[];
    verified_pairs: { a: string; b: string; inliers: number }[];
  };
  error?: JobError;
};

export type LinkPayload = {
  a: string;
  b: string;
  quad_a: Point[];
  quad_b: Point[];
};

/** Non-2xx response decoded from the service's error body. */
export class ApiError extends Error {
  status: number;
  code: string;
  entity: string | null;

  constructor(status: number, code: string, message: string,
              entity: string | null = null) {
    super(message);
    this.status = status;
    this.code = code;
    this.entity = entity;
  }
}

async function toApiError(resp: Response): Promise<ApiError> {
  let code = 'internal_error';
  let message = `request failed with status ${resp.status}`;
  let entity: string | null = null;
  try {
    const body = await resp.json();
    if (typeof body.code === 'string') code = body.code;
    if (typeof body.message === 'string') message = body.message;
    if (typeof body.entity === 'string') entity = body.entity;
  } catch {
    // non-JSON body; keep the fallback message
  }
  return new ApiError(resp.status, code, message, entity);
}

async function request(method: string, path: string,
                       init: RequestInit = {}): Promise<Response> {
  const resp = await fetch(path, { method, ...init });
  if (!resp.ok) throw await toApiError(resp);
  return resp;
}

const JSON_HEADERS = { 'Content-Type': 'application/json' };

export async function listProjects(): Promise<ProjectSummary[]> {
  return (await request('GET', '/projects')).json();
}

export async function createProject(name: string): Promise<ProjectSummary> {
  return (await request('POST', '/projects', {
    headers: JSON_HEADERS,
    body: JSON.stringify({ name }),
  })).json();
}

export async function getProject(projectId: string): Promise<ProjectDetail> {
  return (await request('GET', `/projects/${encodeURIComponent(projectId)}`)).json();
}

export async function uploadImage(projectId: string, file: File,
                                  captureDate?: string,
                                  title?: string): Promise<ImageRecord> {
  const form = new FormData();
  form.append('file', file);
  if (captureDate) form.append('capture_date', captureDate);
  if (title) form.append('title', title);
  const path = `/projects/${encodeURIComponent(projectId)}/images`;
  return (await request('POST', path, { body: form })).json();
}

export async function startAutogroup(projectId: string):
    Promise<{ id: string; status: string }> {
  const path = `/projects/${encodeURIComponent(projectId)}/autogroup`;
  return (await request('POST', path)).json();
}

export async function getJob(projectId: string, jobId: string): Promise<Job> {
  const path = `/projects/${encodeURIComponent(projectId)}/jobs/`
    + encodeURIComponent(jobId);
  return (await request('GET', path)).json();
}

export async function getGroups(projectId: string): Promise<Group[]> {
  const path = `/projects/${encodeURIComponent(projectId)}/groups`;
  const body = await (await request('GET', path)).json();
  return body.groups;
}

/**
 * Submit a manual four-point link. The payload is serialized here, in
 * the documented field order, so every caller produces identical bytes
 * for identical picks.
 */
export async function createLink(projectId: string,
                                 payload: LinkPayload): Promise<LinkRecord> {
  const body = JSON.stringify({
    a: payload.a,
    b: payload.b,
    quad_a: payload.quad_a,
    quad_b: payload.quad_b,
  });
  const path = `/projects/${encodeURIComponent(projectId)}/links`;
  return (await request('POST', path, { headers: JSON_HEADERS, body })).json();
}

export async function deleteLink(projectId: string,
                                 linkId: string): Promise<void> {
  const path = `/projects/${encodeURIComponent(projectId)}/links/`
    + encodeURIComponent(linkId);
  await request('DELETE', path);
}

export function renderUrl(projectId: string, focus: string,
                          date?: string, scale?: number): string {
  const params = new URLSearchParams({ focus });
  if (date !== undefined) params.set('date', date);
  if (scale !== undefined) params.set('scale', String(scale));
  return `/projects/${encodeURIComponent(projectId)}/render?${params}`;
}

/** Fetch one focus-view composite as the PNG blob the server returned. */
export async function fetchRender(projectId: string, focus: string,
                                  opts: { date?: string; scale?: number;
                                          signal?: AbortSignal } = {}):
    Promise<Blob> {
  const url = renderUrl(projectId, focus, opts.date, opts.scale);
  const resp = await request('GET', url, { signal: opts.signal });
  return resp.blob();
}
