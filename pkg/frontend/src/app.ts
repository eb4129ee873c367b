import { ApiClient } from "./api.js";
import { applyLabels, ClassEditor } from "./views/classes.js";
import { renderClusterGrid, renderRunProgress } from "./views/grid.js";
import { StorylineView } from "./views/storyline.js";
import { renderTableView, renderThread } from "./views/tableview.js";
import {
  DEFAULT_VIEW,
  parseViewState,
  serializeViewState,
  ViewState,
} from "./viewstate.js";

const POLL_MS = 2000;

/**
 * Single-page shell: ViewState in, DOM out. All analytics come from the API
 * verbatim; the client only routes, renders, and edits knobs.
 */
export class App {
  state: ViewState;
  private pollTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly win: Window = window,
  ) {
    this.state = parseViewState(this.win.location.search);
    this.win.addEventListener("popstate", () => {
      this.state = parseViewState(this.win.location.search);
      void this.render();
    });
  }

  setState(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    const query = serializeViewState(this.state);
    this.win.history.pushState(null, "", query ? `?${query}` : this.win.location.pathname);
    void this.render();
  }

  private section(id: string): HTMLElement {
    let el = this.root.querySelector<HTMLElement>(`#${id}`);
    if (!el) {
      el = document.createElement("section");
      el.id = id;
      this.root.append(el);
    }
    return el;
  }

  private banner(message: string): void {
    const el = this.section("banner");
    el.replaceChildren();
    if (message) {
      const p = document.createElement("p");
      p.className = "error-banner";
      p.textContent = message;
      el.append(p);
    }
  }

  async render(): Promise<void> {
    if (this.pollTimer !== null) {
      clearTimeout(this.pollTimer);
      this.pollTimer = null;
    }
    this.banner("");
    if (this.state.run === null) {
      await this.renderRunPicker();
      return;
    }
    const info = await this.api.run(this.state.run);
    if (info.status !== "done") {
      renderRunProgress(this.section("main"), info);
      if (info.status === "queued" || info.status === "ingesting" ||
          info.status === "fitting" || info.status === "profiling") {
        this.pollTimer = setTimeout(() => void this.render(), POLL_MS);
      }
      return;
    }
    if (this.state.thread !== null) {
      await this.renderThreadView(info.dataset, this.state.thread);
      return;
    }
    if (this.state.cluster !== null) {
      await this.renderClusterDetail(this.state.run, this.state.cluster);
      return;
    }
    await this.renderRunOverview(this.state.run);
  }

  private async renderRunPicker(): Promise<void> {
    const main = this.section("main");
    main.replaceChildren();
    const runs = await this.api.listRuns();
    const heading = document.createElement("h2");
    heading.textContent = "Runs";
    const list = document.createElement("ul");
    list.className = "run-list";
    for (const run of runs) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `?run=${run.run_id}`;
      link.textContent = `${run.run_id} — ${run.dataset} (${run.status})`;
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        this.setState({ run: run.run_id });
      });
      item.append(link);
      list.append(item);
    }
    main.append(heading, list);
  }

  private async renderRunOverview(runId: string): Promise<void> {
    const main = this.section("main");
    main.replaceChildren();

    const grid = document.createElement("div");
    grid.id = "grid";
    const tv = document.createElement("div");
    tv.id = "tableview";
    main.append(grid, tv);

    const [clusters, heatmap, rows] = await Promise.all([
      this.api.clusters(runId),
      this.api.heatmapCsv(runId),
      this.api.tableview(runId, this.state.k),
    ]);
    renderClusterGrid(grid, clusters, heatmap, (clusterId) =>
      this.setState({ cluster: clusterId }),
    );
    renderTableView(tv, rows);
    this.mountClassEditor(main, runId);
  }

  private mountClassEditor(main: HTMLElement, runId: string): void {
    const panel = document.createElement("div");
    panel.id = "class-editor";
    const editor = new ClassEditor(
      this.api,
      runId,
      this.state.classes ?? {},
      (result) => {
        applyLabels(this.root, result.labels);
        this.banner("");
      },
      (message) => this.banner(message),
    );
    const save = document.createElement("button");
    save.textContent = "Relabel";
    save.addEventListener("click", () => void editor.save());
    const cancel = document.createElement("button");
    cancel.textContent = "Cancel";
    cancel.addEventListener("click", () => this.setState({ classes: null }));
    panel.append(save, cancel);
    main.append(panel);
  }

  private async renderClusterDetail(runId: string, clusterId: number): Promise<void> {
    const main = this.section("main");
    main.replaceChildren();

    const back = document.createElement("a");
    back.href = "#";
    back.textContent = "← all clusters";
    back.addEventListener("click", (ev) => {
      ev.preventDefault();
      this.setState({ cluster: null });
    });
    const story = document.createElement("div");
    story.id = "storyline";
    main.append(back, story);

    const view = new StorylineView(
      this.api,
      story,
      runId,
      clusterId,
      (threadId) => this.setState({ thread: threadId }),
      (knobs) => this.setState({ rt: knobs.rt }),
    );
    await view.load(this.state.rt === DEFAULT_VIEW.rt ? undefined : this.state.rt);
  }

  private async renderThreadView(datasetId: string, threadId: string): Promise<void> {
    const main = this.section("main");
    main.replaceChildren();
    const back = document.createElement("a");
    back.href = "#";
    back.textContent = "← back to cluster";
    back.addEventListener("click", (ev) => {
      ev.preventDefault();
      this.setState({ thread: null });
    });
    const holder = document.createElement("div");
    holder.id = "thread";
    main.append(back, holder);
    renderThread(holder, await this.api.thread(datasetId, threadId));
  }
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  const app = new App(new ApiClient(baseUrl), root);
  void app.render();
  return app;
}
