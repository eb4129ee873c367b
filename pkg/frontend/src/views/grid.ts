import { ClusterDoc, RunInfo } from "../types.js";

export interface HeatmapRow {
  clusterId: number;
  values: number[]; // normalized metric values, API order
}

export function parseHeatmapCsv(csv: string): { metrics: string[]; rows: HeatmapRow[] } {
  const lines = csv.trim().split("\n");
  const metrics = lines[0].split(",").slice(1);
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",");
    return { clusterId: Number(cells[0]), values: cells.slice(1).map(Number) };
  });
  return { metrics, rows };
}

function heatColor(v: number): string {
  // white → saturated blue over the normalized [0, 1] range
  const shade = Math.round(255 - 155 * Math.min(1, Math.max(0, v)));
  return `rgb(${shade}, ${shade}, 255)`;
}

export function labelBadge(doc: ClusterDoc): HTMLSpanElement {
  const badge = document.createElement("span");
  badge.className = "badge";
  badge.dataset.clusterId = String(doc.cluster_id);
  badge.textContent = doc.label.is_mix
    ? `Mix(${doc.label.tied_labels.join("+")})`
    : doc.label.label;
  return badge;
}

/**
 * Clusters × normalized-metrics heat map. One row per cluster, anomalous
 * rows highlighted; a row click drills into the cluster.
 */
export function renderClusterGrid(
  container: HTMLElement,
  clusters: ClusterDoc[],
  heatmapCsv: string,
  onSelect: (clusterId: number) => void,
): void {
  container.replaceChildren();
  if (clusters.length === 0) {
    const empty = document.createElement("p");
    empty.className = "empty-state";
    empty.textContent = "No clusters were extracted from this run.";
    container.append(empty);
    return;
  }

  const { metrics, rows } = parseHeatmapCsv(heatmapCsv);
  const byId = new Map(rows.map((r) => [r.clusterId, r.values]));

  const table = document.createElement("table");
  table.className = "cluster-grid";
  const thead = document.createElement("thead");
  const head = document.createElement("tr");
  for (const name of ["cluster", "label", ...metrics, "users", "threads", "weeks"]) {
    const th = document.createElement("th");
    th.textContent = name;
    head.append(th);
  }
  thead.append(head);
  table.append(thead);

  const body = document.createElement("tbody");
  const cell = (row: HTMLTableRowElement): HTMLTableCellElement => {
    const td = document.createElement("td");
    row.append(td);
    return td;
  };
  for (const doc of clusters) {
    const row = document.createElement("tr");
    row.className = doc.anomalous ? "cluster-row anomalous" : "cluster-row";
    row.dataset.clusterId = String(doc.cluster_id);
    row.addEventListener("click", () => onSelect(doc.cluster_id));

    cell(row).textContent = String(doc.cluster_id);
    cell(row).append(labelBadge(doc));
    const values = byId.get(doc.cluster_id) ?? [];
    for (const v of values) {
      const td = cell(row);
      td.textContent = v.toFixed(2);
      td.style.backgroundColor = heatColor(v);
    }
    cell(row).textContent = String(doc.users.length);
    cell(row).textContent = String(doc.threads.length);
    cell(row).textContent = String(doc.weeks.length);
    body.append(row);
  }
  table.append(body);
  container.append(table);
}

/** Shown instead of the grid while the run is still queued or fitting. */
export function renderRunProgress(container: HTMLElement, info: RunInfo): void {
  container.replaceChildren();
  const box = document.createElement("div");
  box.className = "run-progress";
  const stage = info.stage ? ` (${info.stage})` : "";
  box.textContent =
    info.status === "failed"
      ? `Run failed${stage}: ${info.error ?? "unknown error"}`
      : `Run is ${info.status}${stage}…`;
  container.append(box);
}
