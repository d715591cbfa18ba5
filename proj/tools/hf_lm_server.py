#!/usr/bin/env python3
"""Serve a Hugging Face causal language model to deepck's external backend.

Reads one JSON request per line on stdin and writes one JSON reply per line on stdout.

    python3 tools/hf_lm_server.py --model gpt2
    DEEPCK_EXTERNAL_LM="python3 tools/hf_lm_server.py --model gpt2" ./build/tests/acceptance
"""

import argparse
import json
import sys

import torch
from transformers import AutoModelForCausalLM, AutoTokenizer


class Server:
    def __init__(self, model_name, device):
        self.tok = AutoTokenizer.from_pretrained(model_name)
        if not self.tok.is_fast:
            raise SystemExit("a fast tokenizer is required for offset mappings")
        self.model = AutoModelForCausalLM.from_pretrained(model_name).to(device).eval()
        self.device = device
        self.name = model_name
        start = self.tok.bos_token_id if self.tok.bos_token_id is not None else self.tok.eos_token_id
        if start is None:
            raise SystemExit("the tokenizer has neither a BOS nor an EOS token to condition on")
        self.start = start
        window = getattr(self.model.config, "max_position_embeddings", None) or self.tok.model_max_length
        self.window = int(min(window, 1 << 20)) - 1  # one position goes to the start token
        self.vocab_size = int(self.model.get_output_embeddings().weight.shape[0])

    def describe(self, _req):
        return {"name": self.name, "vocab_size": self.vocab_size, "context_window": self.window}

    def tokenize(self, req):
        text = req["text"]
        enc = self.tok(text, add_special_tokens=False, return_offsets_mapping=True)
        # character offsets to byte offsets
        byte_at = [0]
        for ch in text:
            byte_at.append(byte_at[-1] + len(ch.encode("utf-8")))
        offsets = [[byte_at[b], byte_at[e]] for b, e in enc["offset_mapping"]]
        return {"ids": enc["input_ids"], "offsets": offsets}

    def detokenize(self, req):
        return {"text": self.tok.decode(req["ids"])}

    @torch.no_grad()
    def logprobs(self, req):
        ids = torch.tensor([[self.start] + list(req["ids"])], device=self.device)
        logits = self.model(ids).logits[0, -1].double()
        return {"logprobs": torch.log_softmax(logits, dim=-1).tolist()}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", required=True, help="model name or local directory")
    ap.add_argument("--device", default="cpu")
    args = ap.parse_args()
    server = Server(args.model, args.device)
    ops = {"describe": server.describe, "tokenize": server.tokenize,
           "detokenize": server.detokenize, "logprobs": server.logprobs}
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            reply = ops[req["op"]](req)
        except Exception as e:  # reported to the caller, which raises
            reply = {"error": f"{type(e).__name__}: {e}"}
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
