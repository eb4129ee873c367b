import { ApiClient, ApiError } from "../api.js";
import { StorylineDoc } from "../types.js";

export interface StorylineKnobs {
  rt: number;
}

/**
 * Date-ordered cluster timeline. Entries render in API order; changing the
 * r_t knob issues a new storyline request and re-renders in place.
 */
export class StorylineView {
  constructor(
    private readonly api: ApiClient,
    private readonly container: HTMLElement,
    private readonly runId: string,
    private readonly clusterId: number,
    private readonly onOpenThread: (threadId: string) => void,
    private readonly onKnobChange: (knobs: StorylineKnobs) => void = () => {},
  ) {}

  async load(rt?: number): Promise<void> {
    let doc: StorylineDoc;
    try {
      doc = await this.api.storyline(this.runId, this.clusterId, rt);
    } catch (err) {
      if (err instanceof ApiError && err.code === "storyline_unavailable") {
        this.renderUnavailable(err.message);
        return;
      }
      throw err;
    }
    this.render(doc, rt);
  }

  private renderUnavailable(message: string): void {
    this.container.replaceChildren();
    const notice = document.createElement("p");
    notice.className = "storyline-unavailable";
    notice.textContent = `No storyline for this cluster: ${message}`;
    this.container.append(notice);
  }

  private render(doc: StorylineDoc, rt?: number): void {
    this.container.replaceChildren();

    const knob = document.createElement("label");
    knob.textContent = "threads per topic ";
    const input = document.createElement("input");
    input.type = "number";
    input.min = "1";
    input.name = "rt";
    input.value = String(rt ?? 5);
    input.addEventListener("change", () => {
      const next = Number(input.value);
      if (Number.isInteger(next) && next >= 1) {
        this.onKnobChange({ rt: next });
        void this.load(next);
      }
    });
    knob.append(input);
    this.container.append(knob);

    const topics = document.createElement("p");
    topics.className = "dominant-topics";
    topics.textContent = doc.dominant_topics
      .map((t) => `#${t.topic} [${t.top_words.join(" ")}] ${(t.thread_share * 100).toFixed(0)}%`)
      .join(" · ");
    this.container.append(topics);

    const list = document.createElement("ol");
    list.className = "timeline";
    for (const entry of doc.entries) {
      const item = document.createElement("li");
      item.dataset.threadId = entry.thread_id;
      item.dataset.topic = String(entry.topic);

      const date = document.createElement("span");
      date.className = "date";
      date.textContent = entry.date;

      const title = document.createElement("a");
      title.className = "title";
      title.href = "#";
      title.textContent = entry.title;
      title.addEventListener("click", (ev) => {
        ev.preventDefault();
        this.onOpenThread(entry.thread_id);
      });

      const score = document.createElement("span");
      score.className = "score";
      score.textContent = `(${entry.relevance.toFixed(2)})`;

      item.append(date, " ", title, " ", score);
      list.append(item);
    }
    this.container.append(list);
  }
}
