/** Client for the review service HTTP API. */

export interface Task {
  sentence_id: string;
  tokens: string[];
  projected_tags: string[];
}

export interface Verdict {
  sentence_id: string;
  annotator_id: string;
  verdict: "accepted" | "edited";
  final_tags: string[];
}

export interface Progress {
  [annotator: string]: { reviewed: number; total: number };
}

export class HttpError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "HttpError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function errorText(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    return body.error ?? resp.statusText;
  } catch {
    return resp.statusText;
  }
}

export class ReviewClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  /** null means the queue is exhausted for this annotator (HTTP 204). */
  async nextTask(annotator: string): Promise<Task | null> {
    const url = `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotator)}`;
    const resp = await this.fetchImpl(url);
    if (resp.status === 204) return null;
    if (!resp.ok) throw new HttpError(resp.status, await errorText(resp));
    return (await resp.json()) as Task;
  }

  async postVerdict(verdict: Verdict): Promise<void> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/verdicts`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(verdict),
    });
    if (resp.status !== 201) throw new HttpError(resp.status, await errorText(resp));
  }

  async progress(): Promise<Progress> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/progress`);
    if (!resp.ok) throw new HttpError(resp.status, await errorText(resp));
    return (await resp.json()) as Progress;
  }
}

interface QueueEntry {
  verdict: Verdict;
  resolve: () => void;
  reject: (err: unknown) => void;
}

/**
 * Durable submit path. Verdicts go out strictly one at a time in FIFO
 * order; a connection failure puts the SAME queue head back on the wire
 * after a delay, so recovery can never produce interleaved duplicates of
 * one verdict. A 4xx answer is the server rejecting the verdict itself:
 * the entry is dropped and its promise rejects so the caller can show the
 * message and keep its state.
 */
export class SubmitQueue {
  private queue: QueueEntry[] = [];
  private flushing = false;

  constructor(
    private readonly post: (verdict: Verdict) => Promise<void>,
    private readonly retryDelayMs = 1000,
    private readonly delay: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ) {}

  get pending(): number {
    return this.queue.length;
  }

  push(verdict: Verdict): Promise<void> {
    const done = new Promise<void>((resolve, reject) => {
      this.queue.push({ verdict, resolve, reject });
    });
    void this.flush();
    return done;
  }

  private async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      while (this.queue.length > 0) {
        const head = this.queue[0]!;
        try {
          await this.post(head.verdict);
        } catch (err) {
          if (err instanceof HttpError && err.status < 500) {
            this.queue.shift();
            head.reject(err);
            continue;
          }
          await this.delay(this.retryDelayMs);
          continue;
        }
        this.queue.shift();
        head.resolve();
      }
    } finally {
      this.flushing = false;
    }
  }
}
