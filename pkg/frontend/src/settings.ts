/**
 * Session settings: where the service lives and how the capture loop
 * behaves. Persisted to localStorage so a reload keeps the operator's
 * configuration.
 */

export interface SessionState {
  serviceUrl: string;
  intervalMs: number;
  windowN: number;
  threshold: number;
  lastSpoken: string | null;
}

export const DEFAULTS: SessionState = {
  serviceUrl: "http://127.0.0.1:8000",
  intervalMs: 500,
  windowN: 3,
  threshold: 0.7,
  lastSpoken: null,
};

export const MIN_INTERVAL_MS = 100;

const STORAGE_KEY = "ycd-webui-settings";

export interface SettingsStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

/** Returns one message per invalid field; an empty object means valid. */
export function validateSettings(s: SessionState): Record<string, string> {
  const errors: Record<string, string> = {};
  if (typeof s.serviceUrl !== "string" || s.serviceUrl.trim() === "") {
    errors.serviceUrl = "service URL must not be empty";
  } else {
    try {
      const u = new URL(s.serviceUrl);
      if (u.protocol !== "http:" && u.protocol !== "https:") {
        errors.serviceUrl = "service URL must be http or https";
      }
    } catch {
      errors.serviceUrl = "service URL is not a valid URL";
    }
  }
  if (!Number.isFinite(s.intervalMs) || s.intervalMs < MIN_INTERVAL_MS) {
    errors.intervalMs = `capture interval must be at least ${MIN_INTERVAL_MS} ms`;
  }
  if (!Number.isInteger(s.windowN) || s.windowN < 1) {
    errors.windowN = "stability window must be a whole number of at least 1";
  }
  if (!Number.isFinite(s.threshold) || s.threshold <= 0 || s.threshold > 1) {
    errors.threshold = "confidence threshold must be in (0, 1]";
  }
  return errors;
}

/**
 * Load persisted settings, falling back to defaults field by field.
 * A field that fails validation reverts to its default rather than
 * poisoning the session.
 */
export function loadSettings(storage: SettingsStorage): SessionState {
  const state: SessionState = { ...DEFAULTS };
  let raw: string | null = null;
  try {
    raw = storage.getItem(STORAGE_KEY);
  } catch {
    return state;
  }
  if (!raw) return state;
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return state;
  }
  if (typeof parsed !== "object" || parsed === null) return state;
  const p = parsed as Record<string, unknown>;
  if (typeof p.serviceUrl === "string") state.serviceUrl = p.serviceUrl;
  if (typeof p.intervalMs === "number") state.intervalMs = p.intervalMs;
  if (typeof p.windowN === "number") state.windowN = p.windowN;
  if (typeof p.threshold === "number") state.threshold = p.threshold;
  const errors = validateSettings(state);
  for (const field of Object.keys(errors)) {
    (state as unknown as Record<string, unknown>)[field] =
      (DEFAULTS as unknown as Record<string, unknown>)[field];
  }
  return state;
}

export function saveSettings(storage: SettingsStorage, s: SessionState): void {
  const persisted = {
    serviceUrl: s.serviceUrl,
    intervalMs: s.intervalMs,
    windowN: s.windowN,
    threshold: s.threshold,
  };
  try {
    storage.setItem(STORAGE_KEY, JSON.stringify(persisted));
  } catch {
    // storage may be unavailable (private browsing); settings stay session-local
  }
}
