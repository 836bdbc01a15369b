/** The interactive session flow: upload a dataset, start a session, answer
 * must-link / cannot-link queries until the budget runs out, then show the
 * selected clustering.
 *
 * One flow drives one session. Answers are never optimistic: the buttons
 * stay disabled from click until the service confirms and the next query
 * (or the result) is on screen.
 */

import {
  ApiClient,
  ApiError,
  type AnswerKind,
  type DatasetDetail,
  type QueryPayload,
  type ResultPayload,
  type SessionSummary,
} from "./api.js";
import {
  renderLeaderboard,
  renderQueryView,
  renderResultView,
} from "./views.js";

export interface FlowElements {
  status: HTMLElement;
  query: HTMLElement;
  leaderboard: HTMLElement;
  result: HTMLElement;
  error: HTMLElement;
  mustLink: HTMLButtonElement;
  cannotLink: HTMLButtonElement;
}

export class SessionFlow {
  dataset: DatasetDetail | null = null;
  session: SessionSummary | null = null;
  currentQuery: QueryPayload | null = null;
  lastResult: ResultPayload | null = null;

  private busy = false;
  private inFlight: Promise<void> = Promise.resolve();

  constructor(
    readonly api: ApiClient,
    readonly ui: FlowElements,
    private pollMs = 200,
  ) {
    ui.mustLink.addEventListener("click", () => this.submit("must_link"));
    ui.cannotLink.addEventListener("click", () => this.submit("cannot_link"));
    this.setButtonsEnabled(false);
  }

  /** Resolves once every operation started so far has finished. */
  settle(): Promise<void> {
    return this.inFlight;
  }

  private track(op: Promise<void>): Promise<void> {
    this.inFlight = this.inFlight.then(() => op, () => op);
    return op;
  }

  private setButtonsEnabled(on: boolean): void {
    this.ui.mustLink.disabled = !on;
    this.ui.cannotLink.disabled = !on;
  }

  private setStatus(text: string): void {
    this.ui.status.textContent = text;
  }

  private showError(err: unknown): void {
    const text =
      err instanceof ApiError ? `${err.code}: ${err.message}` : String(err);
    this.ui.error.textContent = text;
    this.ui.error.hidden = false;
  }

  private clearError(): void {
    this.ui.error.textContent = "";
    this.ui.error.hidden = true;
  }

  async upload(
    csvText: string,
    labelCol: string | null,
    name: string,
  ): Promise<DatasetDetail> {
    this.clearError();
    try {
      const summary = await this.api.uploadDataset(csvText, labelCol, name);
      this.dataset = await this.api.dataset(summary.id);
      this.setStatus(
        `dataset ${this.dataset.name}: ${this.dataset.n} instances, ` +
          `${this.dataset.f} features` +
          (this.dataset.labeled ? `, ${this.dataset.classes} classes` : ""),
      );
      return this.dataset;
    } catch (err) {
      this.showError(err);
      throw err;
    }
  }

  async start(options: {
    budget: number;
    m?: number;
    pool_size?: number;
    seed?: number;
  }): Promise<SessionSummary> {
    if (!this.dataset) throw new Error("upload a dataset first");
    this.clearError();
    const run = (async () => {
      let session = await this.api.startSession({
        dataset_id: this.dataset!.id,
        ...options,
      });
      while (session.status === "generating") {
        this.setStatus("generating the clustering ensemble...");
        await new Promise((resolve) => setTimeout(resolve, this.pollMs));
        session = await this.api.session(session.id);
      }
      if (session.status === "failed") {
        throw new ApiError(500, "generation_failed", session.error ?? "failed");
      }
      this.session = session;
      this.setStatus(
        `session ready: ${session.clusterings} clusterings, ` +
          `budget ${session.budget}`,
      );
      renderLeaderboard(this.ui.leaderboard, null, 0);
      await this.advance();
      return session;
    })();
    this.track(run.then(() => undefined, () => undefined));
    return run;
  }

  /** Fetch the next query, or the result once the budget is spent. */
  private async advance(): Promise<void> {
    if (!this.session || !this.dataset) return;
    try {
      const query = await this.api.query(this.session.id);
      this.currentQuery = query;
      renderQueryView(this.ui.query, query, this.dataset);
      this.setButtonsEnabled(true);
    } catch (err) {
      if (err instanceof ApiError && err.status === 410) {
        await this.finish();
        return;
      }
      if (err instanceof ApiError && err.code === "query_pending") {
        // own double-fetch: the rendered query is still the pending one
        if (this.currentQuery) {
          this.setButtonsEnabled(true);
          return;
        }
      }
      this.showError(err);
      throw err;
    }
  }

  private submit(kind: AnswerKind): Promise<void> {
    if (this.busy || !this.session || !this.currentQuery) {
      return this.inFlight;
    }
    this.busy = true;
    this.setButtonsEnabled(false);
    const op = (async () => {
      try {
        const answer = await this.api.answer(this.session!.id, kind);
        this.clearError();
        renderLeaderboard(
          this.ui.leaderboard,
          answer.top,
          answer.progress.u,
        );
        this.setStatus(
          `answered ${answer.progress.u} / ${answer.progress.budget}`,
        );
        this.currentQuery = null;
        await this.advance();
      } catch (err) {
        if (err instanceof ApiError && err.code === "no_pending_query") {
          // double submit lost the race: refetch state instead
          this.currentQuery = null;
          await this.advance();
          return;
        }
        this.showError(err);
        this.setButtonsEnabled(this.currentQuery !== null);
      } finally {
        this.busy = false;
      }
    })();
    return this.track(op);
  }

  private async finish(): Promise<void> {
    if (!this.session || !this.dataset) return;
    const result = await this.api.result(this.session.id);
    this.lastResult = result;
    this.ui.query.textContent = "";
    this.setButtonsEnabled(false);
    renderResultView(this.ui.result, result, this.dataset);
    this.setStatus("budget spent: final selection below");
  }
}

/** Wire the flow into the static page markup. */
export function mountApp(root: Document | HTMLElement, baseUrl = ""): SessionFlow {
  const get = <T extends HTMLElement>(id: string): T => {
    const node = (root instanceof Document ? root : root.ownerDocument!)
      .getElementById(id);
    if (!node) throw new Error(`missing #${id}`);
    return node as T;
  };
  const flow = new SessionFlow(new ApiClient(baseUrl), {
    status: get("status"),
    query: get("query-view"),
    leaderboard: get("leaderboard"),
    result: get("result-view"),
    error: get("error-banner"),
    mustLink: get<HTMLButtonElement>("btn-must-link"),
    cannotLink: get<HTMLButtonElement>("btn-cannot-link"),
  });

  const uploadForm = (root instanceof Document ? root : root.ownerDocument!)
    .getElementById("upload-form") as HTMLFormElement | null;
  if (uploadForm) {
    uploadForm.addEventListener("submit", async (event) => {
      event.preventDefault();
      const fileInput = uploadForm.querySelector<HTMLInputElement>("#csv-file")!;
      const labelInput = uploadForm.querySelector<HTMLInputElement>("#label-col")!;
      const budgetInput = uploadForm.querySelector<HTMLInputElement>("#budget")!;
      const file = fileInput.files?.[0];
      if (!file) return;
      const text = await file.text();
      await flow.upload(text, labelInput.value || null,
                        file.name.replace(/\.csv$/i, ""));
      await flow.start({ budget: Number(budgetInput.value) });
    });
  }
  return flow;
}
