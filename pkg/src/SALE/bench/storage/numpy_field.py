from io import BytesIO
from peewee import Field
import numpy as np


class NumpyField(Field):
    """
    Column holding one float array, serialized in the .npy format.
    """

    field_type = 'NUMPY'

    def db_value(self, value: np.ndarray):
        if value is None:
            return value
        buffer = BytesIO()
        np.save(buffer, np.asarray(value), allow_pickle=False)
        return buffer.getvalue()

    def python_value(self, value: bytes):
        return value if value is None else np.load(BytesIO(value), allow_pickle=False)
