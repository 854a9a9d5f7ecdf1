"""Word-level atomics on uint64 numpy arrays, usable inside nogil jitted code.

All orderings are monotonic (relaxed): the algorithms built on top only need
atomicity of each single word update, never cross-word ordering.
"""

from __future__ import annotations

from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


def _item_pointer(context, builder, aryty, ary_value, idx_value):
    ary = context.make_array(aryty)(context, builder, ary_value)
    return cgutils.get_item_pointer(
        context, builder, aryty, ary, [idx_value], wraparound=False
    )


@intrinsic
def atomic_cas(typingctx, arr, idx, expected, desired):
    """Compare-exchange ``arr[idx]``: store ``desired`` iff the slot still holds
    ``expected``. Returns the value observed before the attempt; the exchange
    succeeded iff that value equals ``expected``."""
    if not isinstance(idx, types.Integer):
        return None
    sig = types.uint64(arr, idx, types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        arr_v, idx_v, exp_v, des_v = args
        ptr = _item_pointer(context, builder, signature.args[0], arr_v, idx_v)
        res = builder.cmpxchg(ptr, exp_v, des_v, "monotonic", "monotonic")
        return builder.extract_value(res, 0)

    return sig, codegen


@intrinsic
def atomic_add(typingctx, arr, idx, value):
    """Atomically add ``value`` to ``arr[idx]``; returns the pre-add value."""
    if not isinstance(idx, types.Integer):
        return None
    sig = types.uint64(arr, idx, types.uint64)

    def codegen(context, builder, signature, args):
        arr_v, idx_v, val_v = args
        ptr = _item_pointer(context, builder, signature.args[0], arr_v, idx_v)
        return builder.atomic_rmw("add", ptr, val_v, "monotonic")

    return sig, codegen


@intrinsic
def atomic_load(typingctx, arr, idx):
    """Atomic read of ``arr[idx]``."""
    if not isinstance(idx, types.Integer):
        return None
    sig = types.uint64(arr, idx)

    def codegen(context, builder, signature, args):
        arr_v, idx_v = args
        ptr = _item_pointer(context, builder, signature.args[0], arr_v, idx_v)
        return builder.load_atomic(ptr, "monotonic", align=8)

    return sig, codegen


@intrinsic
def atomic_store(typingctx, arr, idx, value):
    """Atomic write of ``value`` into ``arr[idx]``."""
    if not isinstance(idx, types.Integer):
        return None
    sig = types.void(arr, idx, types.uint64)

    def codegen(context, builder, signature, args):
        arr_v, idx_v, val_v = args
        ptr = _item_pointer(context, builder, signature.args[0], arr_v, idx_v)
        builder.store_atomic(val_v, ptr, "monotonic", align=8)
        return context.get_dummy_value()

    return sig, codegen
