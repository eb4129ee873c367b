// Fixture API responses mirroring the server's documented shapes.

import { ClusterDoc, RelabelResult, StorylineDoc, TableViewRow } from "../src/types.js";

function cluster(id: number, label: string, anomalous: boolean): ClusterDoc {
  return {
    cluster_id: id,
    users: [
      { name: `u${id}a`, strength: 0.9 },
      { name: `u${id}b`, strength: 0.5 },
    ],
    threads: [{ id: `t${id}`, title: `thread ${id}`, strength: 0.8 }],
    weeks: [{ slot: id, start_date: "2015-01-05", strength: 0.7 }],
    keywords: [
      ["zeus", 3.2],
      ["panel", 1.1],
    ],
    label: { label, scores: { A: 0.4, T: 0.1 }, is_mix: false, tied_labels: [] },
    metrics: { m1: 4, m2: 1, m3: 2, m4: 3, m5: 2, m6: 10, m7: 5, m8: 1, m9: 40, m10: 80 },
    anomalous,
  };
}

export const CLUSTERS: ClusterDoc[] = [
  cluster(0, "A", false),
  cluster(1, "T", true),
  cluster(2, "G", false),
];

export const HEATMAP_CSV =
  "cluster_id,m1,m2,m3,m4,m5,m6,m7,m8,m9,m10\n" +
  "0,1.000000,0.000000,0.500000,0.200000,0.100000,0.300000,0.000000,1.000000,0.400000,0.900000\n" +
  "1,0.000000,1.000000,0.000000,0.800000,0.900000,0.700000,1.000000,0.000000,0.600000,0.100000\n" +
  "2,0.500000,0.500000,1.000000,0.000000,0.500000,0.000000,0.500000,0.500000,1.000000,0.000000\n";

function entries(perTopic: number): StorylineDoc["entries"] {
  const out: StorylineDoc["entries"] = [];
  for (let n = 0; n < perTopic; n++) {
    for (const topic of [0, 1]) {
      out.push({
        thread_id: `t${topic}${n}`,
        title: `thread ${topic}-${n}`,
        date: `2015-02-${String(3 + n).padStart(2, "0")}`,
        topic,
        relevance: 0.9 - 0.1 * n,
      });
    }
  }
  return out.sort((a, b) => a.date.localeCompare(b.date));
}

export function storylineDoc(rt: number): StorylineDoc {
  return {
    cluster_id: 1,
    dominant_topics: [
      { topic: 0, top_words: ["zeus", "panel"], thread_share: 0.5 },
      { topic: 1, top_words: ["ransom", "crypt"], thread_share: 0.3 },
    ],
    entries: entries(rt),
  };
}

export const TABLEVIEW: TableViewRow[] = CLUSTERS.map((c) => ({
  forum_cid: `demo-${c.cluster_id}`,
  n_users: c.users.length,
  type: c.label.label,
  top_threads: c.threads.map((t) => t.id!),
  top_users: c.users.map((u) => u.name!),
  top_dates: ["2015-01-05"],
  dominant_topics: ["zeus", "panel"],
}));

export const RELABEL_RESULT: RelabelResult = {
  run_id: "run123",
  status: "done",
  labels: { "0": "P", "1": "A", "2": "T" },
};

export interface RecordedRequest {
  url: string;
  init?: RequestInit;
}

/** Route-table fetch double that records every issued request. */
export function mockFetch(routes: Record<string, unknown | ((url: string) => unknown)>) {
  const calls: RecordedRequest[] = [];
  const fetchFn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    for (const [prefix, handler] of Object.entries(routes)) {
      if (url.split("?")[0] === prefix) {
        const body = typeof handler === "function" ? handler(url) : handler;
        if (body instanceof Response) return body;
        if (typeof body === "string") {
          return new Response(body, { status: 200, headers: { "Content-Type": "text/csv" } });
        }
        return new Response(JSON.stringify(body), {
          status: 200,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response(JSON.stringify({ code: "not_found", message: url }), { status: 404 });
  };
  return { fetchFn, calls };
}
