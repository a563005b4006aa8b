/**
 * Thin client for the classification service HTTP API. Every function
 * throws ApiError for an HTTP-level failure (the service answered with an
 * error envelope) and lets network failures propagate as fetch rejections,
 * which the capture loop treats as the service being offline.
 */

export interface Prediction {
  label: string;
  probability: number;
}

export interface ClassifyResult {
  predictions: Prediction[];
  latencyMs: number;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

function baseOf(serviceUrl: string): string {
  return serviceUrl.replace(/\/+$/, "");
}

async function throwEnvelope(res: Response): Promise<never> {
  let code = "http_error";
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    if (body && body.error) {
      code = String(body.error.code ?? code);
      message = String(body.error.message ?? message);
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, code, message);
}

export async function classify(
  serviceUrl: string,
  frame: Blob,
  timeoutMs = 1500,
): Promise<ClassifyResult> {
  const contentType = frame.type.startsWith("image/") ? frame.type : "image/jpeg";
  const res = await fetch(`${baseOf(serviceUrl)}/v1/classify`, {
    method: "POST",
    headers: { "content-type": contentType },
    body: frame,
    signal: AbortSignal.timeout(timeoutMs),
  });
  if (!res.ok) await throwEnvelope(res);
  const body = await res.json();
  const predictions: Prediction[] = (body.predictions ?? []).map(
    (p: { label: unknown; probability: unknown }) => ({
      label: String(p.label),
      probability: Number(p.probability),
    }),
  );
  return { predictions, latencyMs: Number(body.latency_ms ?? 0) };
}

export async function health(
  serviceUrl: string,
  timeoutMs = 1500,
): Promise<{ status: string; ready: boolean }> {
  const res = await fetch(`${baseOf(serviceUrl)}/v1/health`, {
    signal: AbortSignal.timeout(timeoutMs),
  });
  if (!res.ok) await throwEnvelope(res);
  return res.json();
}
