// Typed client over the simulation service HTTP API. The base URL is the
// only configuration the UI takes.

export interface Condition {
  question_id: string;
  letter: string;
}

export interface FilterSpec {
  state?: string | null;
  conditions: Condition[];
}

export interface SupportRates {
  dem: number | null;
  rep: number | null;
  valid_votes: number;
}

export interface PopulationSummary {
  size: number;
  per_state: Record<string, number>;
  support: SupportRates;
}

export interface OptionInfo {
  letter: string;
  text: string;
  refusal: boolean;
  polarity: number | null;
  party: string | null;
}

export interface QuestionInfo {
  id: string;
  topic: string;
  text: string;
  options: OptionInfo[];
  voting_subset: boolean;
}

export interface RunListEntry {
  run_id: string;
  mode: string;
  issued: number;
  sample_refs: string[];
}

export interface RunSummary {
  run_id: string;
  mode: string;
  counts: Record<string, number>;
  individuals: number;
  states: string[];
  questionnaire: { questions: number; topics: number; voting_subset: number; avg_options: number };
  questions: QuestionInfo[];
}

export interface StateDistribution {
  values: Record<string, number>;
  modal: string;
  total: number;
}

export interface DistributionPayload {
  question_id: string;
  mode: "absolute" | "relative";
  states: Record<string, StateDistribution>;
}

export interface VoterCard {
  id: string;
  state: string | null;
  tags: Record<string, string | null>;
  posts: string[];
  answers: Record<string, string | null>;
}

export interface SamplePayload {
  population: number;
  cards: VoterCard[];
}

export interface CrosstabPayload {
  dims: string[];
  population: number;
  sampled: number;
  cells: Record<string, number>;
}

export interface ChatSession {
  session_id: string;
  voter: VoterCard;
}

export interface ChatTurn {
  role: "user" | "assistant";
  text: string;
}

export interface ChatReply {
  reply: string;
  history: ChatTurn[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parse<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep statusText
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

function filterQuery(spec: FilterSpec): string {
  const params = new URLSearchParams();
  if (spec.state) params.set("state", spec.state);
  for (const c of spec.conditions) params.append("cond", `${c.question_id}:${c.letter}`);
  const query = params.toString();
  return query ? `&${query}` : "";
}

export class ApiClient {
  constructor(public baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async get<T>(path: string, signal?: AbortSignal): Promise<T> {
    return parse<T>(await fetch(`${this.baseUrl}${path}`, { signal }));
  }

  private async post<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    return parse<T>(
      await fetch(`${this.baseUrl}${path}`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
        signal,
      }),
    );
  }

  listRuns(signal?: AbortSignal): Promise<RunListEntry[]> {
    return this.get("/runs", signal);
  }

  runSummary(runId: string, signal?: AbortSignal): Promise<RunSummary> {
    return this.get(`/runs/${encodeURIComponent(runId)}/summary`, signal);
  }

  filterPopulation(runId: string, spec: FilterSpec, signal?: AbortSignal): Promise<PopulationSummary> {
    return this.post(`/runs/${encodeURIComponent(runId)}/filter`, spec, signal);
  }

  questionDistribution(
    runId: string,
    questionId: string,
    mode: "absolute" | "relative",
    spec: FilterSpec,
    signal?: AbortSignal,
  ): Promise<DistributionPayload> {
    const path =
      `/runs/${encodeURIComponent(runId)}/questions/${encodeURIComponent(questionId)}` +
      `/distribution?mode=${mode}${filterQuery(spec)}`;
    return this.get(path, signal);
  }

  sampleIndividuals(
    runId: string,
    spec: FilterSpec,
    n = 100,
    seed = 0,
    signal?: AbortSignal,
  ): Promise<SamplePayload> {
    return this.post(
      `/runs/${encodeURIComponent(runId)}/individuals/sample`,
      { ...spec, n, seed },
      signal,
    );
  }

  crosstab(
    runId: string,
    dims: string[],
    spec: FilterSpec,
    seed = 0,
    signal?: AbortSignal,
  ): Promise<CrosstabPayload> {
    const path =
      `/runs/${encodeURIComponent(runId)}/crosstab?dims=${encodeURIComponent(dims.join(","))}` +
      `&seed=${seed}${filterQuery(spec)}`;
    return this.get(path, signal);
  }

  openChat(runId: string, voterId: string): Promise<ChatSession> {
    return this.post("/chat/sessions", { run_id: runId, voter_id: voterId });
  }

  sendChat(sessionId: string, text: string): Promise<ChatReply> {
    return this.post(`/chat/sessions/${encodeURIComponent(sessionId)}/messages`, { text });
  }
}
