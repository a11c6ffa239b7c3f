import hashlib

from optimev.ingest import Chain, Status, SwapEvent, TransactionRecord


def addr(name) -> str:
    return "0x" + hashlib.sha256(str(name).encode()).hexdigest()[:40]


def txhash(name) -> str:
    return "0x" + hashlib.sha256(("tx", str(name)).__repr__().encode()).hexdigest()


def swap(tx, sold, bought, a_sold, a_bought, idx):
    return SwapEvent(txhash(tx), addr(sold), addr(bought), a_sold, a_bought, idx)


def tx(name, to="bot", frm="eoa", ts=1_710_288_000, gas=100_000, price=10, calldata=b"", ok=True, block=1, chain=Chain.BASE):
    return TransactionRecord(
        txhash(name), addr(frm), addr(to) if to is not None else None, block, ts, gas, price, calldata,
        Status.SUCCESS if ok else Status.REVERT, chain,
    )
