// The whole analyst view is a function of this state, and the state is a
// function of the URL query string, so every view is a shareable deep link.

export interface ViewState {
  run: string | null;
  cluster: number | null;
  thread: string | null;
  k: number; // top entities per table-view row
  rt: number; // storyline threads per dominant topic
  thDom: number; // dominant-topic coverage threshold
  keywordsN: number; // keywords kept per cluster
  classes: Record<string, string[]> | null; // edited class bags, if any
}

export const DEFAULT_VIEW: ViewState = {
  run: null,
  cluster: null,
  thread: null,
  k: 3,
  rt: 5,
  thDom: 0.7,
  keywordsN: 50,
  classes: null,
};

export function validateKnobs(s: ViewState): string[] {
  const problems: string[] = [];
  if (!Number.isInteger(s.k) || s.k < 1) problems.push("k must be a positive integer");
  if (!Number.isInteger(s.rt) || s.rt < 1) problems.push("rt must be a positive integer");
  if (!(s.thDom > 0 && s.thDom <= 1)) problems.push("thDom must be in (0, 1]");
  if (!Number.isInteger(s.keywordsN) || s.keywordsN < 1) {
    problems.push("keywordsN must be a positive integer");
  }
  if (s.classes !== null) {
    for (const [label, bag] of Object.entries(s.classes)) {
      if (bag.length === 0) problems.push(`class ${label} has an empty bag`);
    }
  }
  return problems;
}

export function serializeViewState(s: ViewState): string {
  const params = new URLSearchParams();
  if (s.run !== null) params.set("run", s.run);
  if (s.cluster !== null) params.set("cluster", String(s.cluster));
  if (s.thread !== null) params.set("thread", s.thread);
  if (s.k !== DEFAULT_VIEW.k) params.set("k", String(s.k));
  if (s.rt !== DEFAULT_VIEW.rt) params.set("rt", String(s.rt));
  if (s.thDom !== DEFAULT_VIEW.thDom) params.set("thDom", String(s.thDom));
  if (s.keywordsN !== DEFAULT_VIEW.keywordsN) params.set("keywordsN", String(s.keywordsN));
  if (s.classes !== null) params.set("classes", JSON.stringify(s.classes));
  return params.toString();
}

export function parseViewState(query: string): ViewState {
  const params = new URLSearchParams(query);
  const s: ViewState = { ...DEFAULT_VIEW };
  const num = (key: string, fallback: number): number => {
    const raw = params.get(key);
    if (raw === null) return fallback;
    const v = Number(raw);
    return Number.isFinite(v) ? v : fallback;
  };
  s.run = params.get("run");
  s.cluster = params.has("cluster") ? num("cluster", 0) : null;
  s.thread = params.get("thread");
  s.k = num("k", DEFAULT_VIEW.k);
  s.rt = num("rt", DEFAULT_VIEW.rt);
  s.thDom = num("thDom", DEFAULT_VIEW.thDom);
  s.keywordsN = num("keywordsN", DEFAULT_VIEW.keywordsN);
  const classes = params.get("classes");
  if (classes !== null) {
    try {
      s.classes = JSON.parse(classes) as Record<string, string[]>;
    } catch {
      s.classes = null;
    }
  }
  if (validateKnobs(s).length > 0) {
    // out-of-range knobs in a pasted link fall back to server defaults
    return { ...DEFAULT_VIEW, run: s.run, cluster: s.cluster, thread: s.thread };
  }
  return s;
}
