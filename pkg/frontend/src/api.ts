// Thin clients for the three documented JSON APIs. Every request the
// console ever makes goes through this file and lands in `log`, which is
// what the mutation audit test inspects.

import type {
  RegisterResult,
  ServedProfile,
  Settings,
  WorldSnapshot,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly code: string,
    public readonly status: number,
  ) {
    super(code);
    this.name = "ApiError";
  }
}

export interface LoggedRequest {
  service: "world" | "ubiserv" | "sn";
  method: string;
  path: string;
}

type FetchFn = typeof fetch;

interface CallOptions {
  body?: unknown;
  headers?: Record<string, string>;
  query?: Record<string, string>;
}

export class ApiClient {
  readonly log: LoggedRequest[] = [];

  constructor(
    public settings: Settings,
    private readonly fetchFn: FetchFn = fetch,
  ) {}

  private async call(
    service: LoggedRequest["service"],
    method: string,
    path: string,
    opts: CallOptions = {},
  ): Promise<any> {
    const base = {
      world: this.settings.worldUrl,
      ubiserv: this.settings.ubiservUrl,
      sn: this.settings.snUrl,
    }[service].replace(/\/$/, "");
    let url = base + path;
    if (opts.query) url += "?" + new URLSearchParams(opts.query).toString();
    this.log.push({ service, method, path });

    let resp: Response;
    try {
      resp = await this.fetchFn(url, {
        method,
        headers: {
          ...(opts.body !== undefined
            ? { "content-type": "application/json" }
            : {}),
          ...(opts.headers ?? {}),
        },
        body: opts.body !== undefined ? JSON.stringify(opts.body) : undefined,
      });
    } catch {
      // same code the device layer uses when its area server is gone;
      // for the other two services the console just names the failure
      throw new ApiError(
        service === "ubiserv" ? "UbiServUnreachable" : "TransportError",
        0,
      );
    }
    const data = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(
        typeof data.error === "string" ? data.error : "InternalError",
        resp.status,
      );
    }
    return data;
  }

  // world
  getSnapshot(): Promise<WorldSnapshot> {
    return this.call("world", "GET", "/world");
  }

  step(move: {
    usnd_id: string;
    x: number;
    y: number;
    heading: number;
  }): Promise<{ tick: number }> {
    return this.call("world", "POST", "/world/step", { body: { moves: [move] } });
  }

  setBeacon(usndId: string, enabled: boolean): Promise<void> {
    return this.call("world", "POST", "/world/beacon", {
      body: { usnd_id: usndId, enabled },
    });
  }

  // ubiserv
  register(usndId: string): Promise<RegisterResult> {
    return this.call("ubiserv", "POST", "/register", {
      body: { usnd_id: usndId },
    });
  }

  deregister(sessionToken: string): Promise<void> {
    return this.call("ubiserv", "POST", "/deregister", {
      body: { session_token: sessionToken },
    });
  }

  setService(sessionToken: string, enabled: boolean): Promise<void> {
    return this.call("ubiserv", "POST", "/service", {
      body: { session_token: sessionToken, enabled },
    });
  }

  requestProfile(
    sessionToken: string,
    targetUsnd: string,
  ): Promise<ServedProfile> {
    return this.call("ubiserv", "GET", "/profile", {
      query: { target: targetUsnd },
      headers: { "x-session-token": sessionToken },
    });
  }

  // social network
  setViewPolicy(userId: string, allowedFields: string[]): Promise<void> {
    return this.call("sn", "PUT", `/users/${userId}/policy`, {
      body: { context: "ubiserv_event", allowed_fields: allowedFields },
    });
  }
}
