"""Reproducible synthetic corpus of labelled token contracts.

Every contract carries the same ERC-20 style boilerplate (with a few
members dropped at random) plus intent-specific members drawn from small
template pools, one pool per intent category.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import numpy as np

from .labels import INTENT_LABELS, NUM_LABELS

SAMPLE_SIZE = 30
SAMPLE_SEED = 20240611
SAMPLE_RESOURCE = "sample_corpus.jsonl"

_BOILERPLATE_ALWAYS = [
    "event Transfer(address indexed from, address indexed to, uint256 value);",
    "event Approval(address indexed owner, address indexed spender, uint256 value);",
    "modifier onlyOwner() {\n        require(_owner == msg.sender, \"Ownable: caller is not the owner\");\n        _;\n    }",
    "function totalSupply() public view returns (uint256) {\n        return _totalSupply;\n    }",
    "function balanceOf(address account) public view returns (uint256) {\n        return _balances[account];\n    }",
    "function transfer(address recipient, uint256 amount) public returns (bool) {\n        _transfer(msg.sender, recipient, amount);\n        return true;\n    }",
    "function approve(address spender, uint256 amount) public returns (bool) {\n        _allowances[msg.sender][spender] = amount;\n        emit Approval(msg.sender, spender, amount);\n        return true;\n    }",
]
_BOILERPLATE_OPTIONAL = [
    "function name() public view returns (string memory) {\n        return _name;\n    }",
    "function symbol() public view returns (string memory) {\n        return _symbol;\n    }",
    "function decimals() public view returns (uint8) {\n        return _decimals;\n    }",
    "function allowance(address owner, address spender) public view returns (uint256) {\n        return _allowances[owner][spender];\n    }",
    "function owner() public view returns (address) {\n        return _owner;\n    }",
]

_INTENT_TEMPLATES: dict[str, list[str]] = {
    "Fee": [
        "function setFeeAddress(address feeAddress) external onlyOwner {\n        _feeAddress = feeAddress;\n    }",
        "function setTaxFeePercent(uint256 taxFee) external onlyOwner {\n        _taxFee = taxFee;\n    }",
        "function setMarketingFee(uint256 fee) external onlyOwner {\n        require(fee <= 25);\n        _marketingFee = fee;\n    }",
    ],
    "DisableTrading": [
        "function enableTrading(bool enabled) external onlyOwner {\n        tradingEnabled = enabled;\n    }",
        "function setTradingOpen(bool open) external onlyOwner {\n        tradingOpen = open;\n    }",
    ],
    "Blacklist": [
        "function addToBlacklist(address account) external onlyOwner {\n        isBlacklisted[account] = true;\n    }",
        "function checkBlacklist(address sender) internal view {\n        require(!isBlacklisted[sender], \"blacklisted\");\n    }",
    ],
    "Reflect": [
        "function tokenFromReflection(uint256 rAmount) public view returns (uint256) {\n        require(rAmount <= _rTotal);\n        return rAmount / _getRate();\n    }",
        "function reflectionFromToken(uint256 tAmount, bool deductFee) public view returns (uint256) {\n        return tAmount * _getRate();\n    }",
    ],
    "MaxTX": [
        "function setMaxTxPercent(uint256 maxTxPercent) external onlyOwner {\n        _maxTxAmount = _totalSupply * maxTxPercent / 100;\n    }",
        "function setMaxTxAmount(uint256 maxTxAmount) external onlyOwner {\n        _maxTxAmount = maxTxAmount;\n    }",
    ],
    "Mint": [
        "function mint(uint256 amount) external onlyOwner {\n        _balances[msg.sender] += amount;\n        _totalSupply += amount;\n    }",
        "function mintTo(address to, uint256 amount) public onlyOwner returns (bool) {\n        _balances[to] += amount;\n        _totalSupply += amount;\n        return true;\n    }",
    ],
    "Honeypot": [
        "function checkAllow(address from) internal view {\n        require(allow[from], \"not allowed\");\n    }",
        "function setAllow(address holder, bool allowed) external onlyOwner {\n        allow[holder] = allowed;\n    }",
    ],
    "Reward": [
        "function updateDividendTracker(address newAddress) public onlyOwner {\n        dividendTracker = DividendTracker(newAddress);\n    }",
        "function claimReward() external {\n        uint256 reward = pendingReward[msg.sender];\n        pendingReward[msg.sender] = 0;\n        _balances[msg.sender] += reward;\n    }",
    ],
    "Rebase": [
        "event LogRebase(uint256 indexed epoch, uint256 totalSupply);",
        "function rebase(uint256 epoch, int256 supplyDelta) external onlyOwner returns (uint256) {\n        _totalSupply = uint256(int256(_totalSupply) + supplyDelta);\n        emit LogRebase(epoch, _totalSupply);\n        return _totalSupply;\n    }",
    ],
    "MaxSell": [
        "function setMaxSellToken(uint256 amount) external onlyOwner {\n        maxSellToken = amount;\n    }",
        "function setSellLimit(address account, uint256 limit) external onlyOwner {\n        sellLimit[account] = limit;\n    }",
    ],
}

_NAMES = ["Moon", "Safe", "Doge", "Baby", "Floki", "Shiba", "Elon", "Rocket", "Cake", "Pepe"]


def _assign_labels(rng: np.random.Generator, n: int) -> np.ndarray:
    labels = np.zeros((n, NUM_LABELS), dtype=np.int8)
    labels[0, INTENT_LABELS.index("Fee")] = 1
    labels[0, INTENT_LABELS.index("Reflect")] = 1
    # every category shows up at least three times
    for j in range(NUM_LABELS):
        for i in rng.choice(np.arange(1, n), size=3, replace=False):
            labels[i, j] = 1
    for i in range(1, n):
        while labels[i].sum() > 3:
            labels[i, rng.choice(np.flatnonzero(labels[i]))] = 0
        if labels[i].sum() == 0:
            labels[i, rng.integers(NUM_LABELS)] = 1
    for j in range(NUM_LABELS):
        if labels[:, j].sum() < 2:
            for i in rng.choice(np.arange(1, n), size=2, replace=False):
                labels[i, j] = 1
    return labels


def _contract_source(rng: np.random.Generator, idx: int, labels: np.ndarray) -> str:
    name = f"{_NAMES[idx % len(_NAMES)]}Token{idx}"
    members = list(_BOILERPLATE_ALWAYS)
    members += [m for m in _BOILERPLATE_OPTIONAL if rng.random() < 0.9]
    intents = []
    for j in np.flatnonzero(labels):
        pool = _INTENT_TEMPLATES[INTENT_LABELS[j]]
        picks = rng.choice(len(pool), size=min(len(pool), 1 + int(rng.integers(2))), replace=False)
        intents += [pool[p] for p in sorted(picks)]
    body_members = members[:3] + intents + members[3:]
    body = "\n\n    ".join(body_members)
    return (
        "// SPDX-License-Identifier: MIT\n"
        "pragma solidity ^0.8.0;\n\n"
        "import \"./IERC20.sol\";\n\n"
        f"/**\n * @title {name}\n */\n"
        f"contract {name} is IERC20 {{\n"
        "    mapping(address => uint256) private _balances;\n"
        "    mapping(address => mapping(address => uint256)) private _allowances;\n"
        "    uint256 private _totalSupply;\n"
        "    address private _owner;\n\n"
        "    constructor() {\n"
        "        _owner = msg.sender;\n"
        f"        _totalSupply = {1_000_000 * (idx + 1)} * 10 ** 9;\n"
        "        _balances[msg.sender] = _totalSupply;\n"
        "    }\n\n"
        f"    {body}\n"
        "}\n"
    )


def generate_sample_corpus(n: int = SAMPLE_SIZE, seed: int = SAMPLE_SEED) -> list[dict]:
    rng = np.random.default_rng(seed)
    labels = _assign_labels(rng, n)
    records = []
    for i in range(n):
        address = "0x" + bytes(rng.integers(0, 256, size=20, dtype=np.uint8)).hex()
        records.append(
            {"address": address, "source": _contract_source(rng, i, labels[i]), "labels": labels[i].tolist()}
        )
    return records


def dump_jsonl(records: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def write_sample_corpus(path: str | Path, n: int = SAMPLE_SIZE, seed: int = SAMPLE_SEED) -> Path:
    path = Path(path)
    path.write_text(dump_jsonl(generate_sample_corpus(n, seed)), encoding="utf-8")
    return path


def sample_corpus_path() -> Path:
    return Path(str(resources.files("intentlens.data").joinpath(SAMPLE_RESOURCE)))
