export type FeedbackKind = 'full_ranking' | 'best_only' | 'accept_and_exit';

export interface TrajectoryWire {
  points: [number, number][];
}

export interface RoundPayload {
  session_id: string;
  round: number;
  stage: 'stage1' | 'stage2';
  prompt_kind: string;
  m: number;
  candidates: TrajectoryWire[];
  allowed_feedback: FeedbackKind[];
}

export interface FinalPayload {
  latent: number[];
  trajectory: TrajectoryWire;
  saved_entry_id: string | null;
}

export interface FeedbackResponse {
  status: 'in_progress' | 'finished';
  round?: RoundPayload;
  final?: FinalPayload;
}

export interface CreateSessionBody {
  purpose: 'representative' | 'personalize' | 'style_aware';
  condition_text: string;
  mode?: 'human' | 'scripted';
  store_id?: string;
  warm_start_id?: string;
  seed?: number;
  config?: Record<string, unknown>;
}

export interface SessionMeta {
  id: string;
  purpose: string;
  status: string;
  condition_text: string;
  rounds_completed: number;
  final_latent: number[] | null;
  saved_entry_id: string | null;
  store_id: string | null;
}
