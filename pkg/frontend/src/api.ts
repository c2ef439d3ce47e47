/**
 * Typed client for the makeup job service. All traffic goes through the HTTP
 * API; fetch and EventSource are injectable so tests can script them.
 */

import type { SpecDocument } from "./spec.js";

export type JobState = "queued" | "running" | "done" | "failed" | "cancelled";

export const TERMINAL_STATES: ReadonlySet<string> = new Set(["done", "failed", "cancelled"]);

export interface JobDocument {
  id: string;
  state: JobState;
  spec: Record<string, unknown>;
  backend: string;
  progress: number;
  stage: string;
  error: string;
  created_at: number;
  updated_at: number;
  has_result: boolean;
}

export interface JobEvent {
  kind: string; // stage | step | done | failed | cancelled
  stage: string;
  fraction: number;
  message: string;
}

export interface BackendInfo {
  id: string;
  description: string;
}

export interface RegionInfo {
  regions: string[];
  derived: string[];
  colorable: string[];
  compose_order: string[];
}

export interface SubmitFiles {
  image: Blob;
  labels?: Blob;
  reference?: Blob;
  referenceLabels?: Blob;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: unknown; detail?: unknown };
    const found = body.error ?? body.detail;
    if (typeof found === "string") return found;
    if (found !== undefined) return JSON.stringify(found);
  } catch {
    // non-JSON error body; fall through to the status line
  }
  return `HTTP ${resp.status}`;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class MakeupClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as T;
  }

  async submit(spec: SpecDocument, files: SubmitFiles): Promise<{ id: string; state: JobState }> {
    const form = new FormData();
    form.append("image", files.image, "image.png");
    if (files.labels) form.append("labels", files.labels, "labels.png");
    if (files.reference) form.append("reference", files.reference, "reference.png");
    if (files.referenceLabels) {
      form.append("reference_labels", files.referenceLabels, "reference_labels.png");
    }
    form.append("spec", JSON.stringify(spec));
    return this.request("/api/jobs", { method: "POST", body: form });
  }

  getJob(id: string): Promise<JobDocument> {
    return this.request(`/api/jobs/${id}`);
  }

  backends(): Promise<{ backends: BackendInfo[]; default: string }> {
    return this.request("/api/backends");
  }

  regions(): Promise<RegionInfo> {
    return this.request("/api/regions");
  }

  resultUrl(id: string): string {
    return `${this.baseUrl}/api/jobs/${id}/result`;
  }

  eventsUrl(id: string): string {
    return `${this.baseUrl}/api/jobs/${id}/events`;
  }

  /** Poll a job until it parks in a terminal state, yielding each document. */
  async *watch(
    id: string,
    intervalMs = 500,
    sleep: (ms: number) => Promise<void> = defaultSleep,
  ): AsyncGenerator<JobDocument> {
    for (;;) {
      const job = await this.getJob(id);
      yield job;
      if (TERMINAL_STATES.has(job.state)) return;
      await sleep(intervalMs);
    }
  }
}

// ---------------------------------------------------------------------------
// progress streaming: SSE when available, polling otherwise

export interface EventSourceLike {
  onmessage: ((ev: { data: string }) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
}

export type EventSourceFactory = (url: string) => EventSourceLike;

export interface StreamHandlers {
  onEvent: (event: JobEvent) => void;
  onEnd: (reason: string) => void;
}

function jobToEvent(job: JobDocument): JobEvent {
  const kind = TERMINAL_STATES.has(job.state) ? job.state : "step";
  return { kind, stage: job.stage, fraction: job.progress, message: job.error };
}

/**
 * Follow a job's progress. Returns a stop function. The SSE stream is
 * preferred; any stream error before a terminal event silently downgrades to
 * polling, so progress keeps flowing on proxies that buffer event streams.
 */
export function streamEvents(
  client: MakeupClient,
  id: string,
  handlers: StreamHandlers,
  makeSource?: EventSourceFactory,
  pollIntervalMs = 500,
): () => void {
  let stopped = false;
  let source: EventSourceLike | null = null;

  const finish = (reason: string) => {
    if (stopped) return;
    stopped = true;
    source?.close();
    handlers.onEnd(reason);
  };

  const poll = async () => {
    try {
      for await (const job of client.watch(id, pollIntervalMs)) {
        if (stopped) return;
        handlers.onEvent(jobToEvent(job));
        if (TERMINAL_STATES.has(job.state)) return finish(job.state);
      }
    } catch (err) {
      finish(err instanceof Error ? err.message : String(err));
    }
  };

  const factory =
    makeSource ??
    (typeof EventSource !== "undefined"
      ? (url: string) => new EventSource(url) as unknown as EventSourceLike
      : undefined);

  if (!factory) {
    void poll();
    return () => finish("stopped");
  }

  let sawTerminal = false;
  source = factory(client.eventsUrl(id));
  source.onmessage = (ev) => {
    if (stopped) return;
    let event: JobEvent;
    try {
      event = JSON.parse(ev.data) as JobEvent;
    } catch {
      return; // keep-alives and noise are not data frames
    }
    handlers.onEvent(event);
    if (TERMINAL_STATES.has(event.kind)) {
      sawTerminal = true;
      finish(event.kind);
    }
  };
  source.onerror = () => {
    if (stopped || sawTerminal) return;
    source?.close();
    source = null;
    void poll();
  };
  return () => finish("stopped");
}
