import { ApiClient } from "../api.js";
import { RelabelResult } from "../types.js";

/**
 * Class-bag editor. Validates locally (labels unique, bags non-empty) and
 * only on a valid save posts to the relabel endpoint; cancel issues nothing.
 */
export class ClassEditor {
  private bags: Record<string, string[]>;

  constructor(
    private readonly api: ApiClient,
    private readonly runId: string,
    initialBags: Record<string, string[]>,
    private readonly onRelabeled: (result: RelabelResult) => void,
    private readonly onError: (message: string) => void,
  ) {
    this.bags = structuredClone(initialBags);
  }

  setBag(label: string, words: string[]): void {
    this.bags[label] = words
      .map((w) => w.trim().toLowerCase())
      .filter((w) => w.length > 0);
  }

  removeClass(label: string): void {
    delete this.bags[label];
  }

  validate(): string[] {
    const problems: string[] = [];
    const labels = Object.keys(this.bags);
    if (labels.length < 2) problems.push("at least two classes are required");
    for (const label of labels) {
      if (this.bags[label].length === 0) problems.push(`class ${label} has an empty bag`);
    }
    return problems;
  }

  /** Returns false (and reports why) without any request when invalid. */
  async save(): Promise<boolean> {
    const problems = this.validate();
    if (problems.length > 0) {
      this.onError(problems.join("; "));
      return false;
    }
    try {
      const result = await this.api.relabel(this.runId, this.bags);
      this.onRelabeled(result);
      return true;
    } catch (err) {
      // non-destructive: existing labels stay on screen
      this.onError(err instanceof Error ? err.message : String(err));
      return false;
    }
  }
}

/** Patch label badges in place after a relabel round trip. */
export function applyLabels(root: ParentNode, labels: Record<string, string>): void {
  for (const badge of root.querySelectorAll<HTMLElement>(".badge[data-cluster-id]")) {
    const label = labels[badge.dataset.clusterId!];
    if (label !== undefined) badge.textContent = label;
  }
}
