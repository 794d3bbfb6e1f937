/** Protocol error carrying the HTTP status and wire error type. */
export class AdapterError extends Error {
  constructor(
    public readonly status: number,
    public readonly type: string,
    message: string,
  ) {
    super(message);
  }
}

export const badRequest = (message: string) =>
  new AdapterError(400, "bad_request", message);

export const unavailable = (message: string) =>
  new AdapterError(503, "backend_unavailable", message);

export const modeUnsupported = (message: string) =>
  new AdapterError(422, "mode_unsupported", message);
