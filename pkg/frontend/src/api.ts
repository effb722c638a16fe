// Client for the propose service. Maps its three failure modes explicitly:
// field-level validation (400), service unavailable (503), network failure.

export interface ProposalResponse {
  proposal: number[];
  input_confidence: number;
  proposal_confidence: number;
  input_ink: number;
  proposal_ink: number;
  l1_change: number;
  predicted_input_class: number;
  predicted_proposal_class: number;
}

export type ProposeResult =
  | { kind: "ok"; response: ProposalResponse }
  | { kind: "invalid"; field: string; message: string }
  | { kind: "unavailable"; message: string };

export async function requestProposal(
  baseUrl: string,
  pixels: readonly number[],
  label: number,
  fetchImpl: typeof fetch = fetch,
): Promise<ProposeResult> {
  let response: Response;
  try {
    response = await fetchImpl(`${baseUrl}/propose`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ pixels, label }),
    });
  } catch (err) {
    return { kind: "unavailable", message: `service unreachable: ${String(err)}` };
  }
  if (response.status === 400) {
    const body = await response.json().catch(() => ({ error: {} }));
    return {
      kind: "invalid",
      field: body?.error?.field ?? "request",
      message: body?.error?.message ?? "rejected by the service",
    };
  }
  if (!response.ok) {
    return { kind: "unavailable", message: `service returned ${response.status}` };
  }
  return { kind: "ok", response: (await response.json()) as ProposalResponse };
}
