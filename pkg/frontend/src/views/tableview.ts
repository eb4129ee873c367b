import { TableViewRow, ThreadDoc } from "../types.js";

const COLUMNS: [keyof TableViewRow, string][] = [
  ["forum_cid", "cluster"],
  ["n_users", "#users"],
  ["type", "type"],
  ["top_threads", "top threads"],
  ["top_users", "top users"],
  ["top_dates", "top dates"],
  ["dominant_topics", "dominant topics"],
];

/** One summary row per cluster, rendered verbatim from the API response. */
export function renderTableView(container: HTMLElement, rows: TableViewRow[]): void {
  container.replaceChildren();
  const table = document.createElement("table");
  table.className = "tableview";
  const thead = document.createElement("thead");
  const head = document.createElement("tr");
  for (const [, title] of COLUMNS) {
    const th = document.createElement("th");
    th.textContent = title;
    head.append(th);
  }
  thead.append(head);
  table.append(thead);
  const body = document.createElement("tbody");
  for (const row of rows) {
    const tr = document.createElement("tr");
    tr.className = "tableview-row";
    const cid = row.forum_cid.split("-").pop() ?? row.forum_cid;
    tr.dataset.clusterId = cid;
    for (const [field] of COLUMNS) {
      const value = row[field];
      const cell = document.createElement("td");
      tr.append(cell);
      if (field === "type") {
        const badge = document.createElement("span");
        badge.className = "badge";
        badge.dataset.clusterId = cid;
        badge.textContent = String(value);
        cell.append(badge);
      } else {
        cell.textContent = Array.isArray(value) ? value.join(", ") : String(value);
      }
    }
    body.append(tr);
  }
  table.append(body);
  container.append(table);
}

/** Raw posts of one thread, the end of the drill-down path. */
export function renderThread(container: HTMLElement, doc: ThreadDoc): void {
  container.replaceChildren();
  const heading = document.createElement("h3");
  heading.textContent = `${doc.title} (${doc.thread_id})`;
  container.append(heading);

  const list = document.createElement("ul");
  list.className = "thread-posts";
  for (const post of doc.posts) {
    const item = document.createElement("li");
    const author = document.createElement("span");
    author.className = "author";
    author.textContent = post.username;
    const date = document.createElement("span");
    date.className = "date";
    date.textContent = post.date;
    const content = document.createElement("p");
    content.className = "content";
    content.textContent = post.content;
    item.append(author, " — ", date, content);
    list.append(item);
  }
  container.append(list);
}
