// Response shapes of the run-store HTTP API, mirrored field for field.

export interface EntityStrength {
  name?: string;
  id?: string;
  title?: string;
  slot?: number;
  start_date?: string;
  strength: number;
}

export interface ClusterLabel {
  label: string;
  scores: Record<string, number>;
  is_mix: boolean;
  tied_labels: string[];
}

export interface ClusterDoc {
  cluster_id: number;
  users: EntityStrength[];
  threads: EntityStrength[];
  weeks: EntityStrength[];
  keywords: [string, number][];
  label: ClusterLabel;
  metrics: Record<string, number>;
  anomalous: boolean;
}

export interface DominantTopic {
  topic: number;
  top_words: string[];
  thread_share: number;
}

export interface StorylineEntry {
  thread_id: string;
  title: string;
  date: string;
  topic: number;
  relevance: number;
}

export interface StorylineDoc {
  cluster_id: number;
  dominant_topics: DominantTopic[];
  entries: StorylineEntry[];
}

export interface TableViewRow {
  forum_cid: string;
  n_users: number;
  type: string;
  top_threads: string[];
  top_users: string[];
  top_dates: string[];
  dominant_topics: string[];
}

export interface RunInfo {
  run_id: string;
  dataset: string;
  status: string;
  stage?: string | null;
  error?: string | null;
  config?: Record<string, unknown>;
}

export interface ThreadPost {
  post_id: string;
  username: string;
  date: string;
  content: string;
}

export interface ThreadDoc {
  thread_id: string;
  title: string;
  posts: ThreadPost[];
}

export interface RelabelResult {
  run_id: string;
  status: string;
  labels: Record<string, string>;
}

export interface ScreePoint {
  cluster_id: number;
  x: number;
  y: number;
  label: string;
}

export type ScreeDoc = Record<string, ScreePoint[]>;
