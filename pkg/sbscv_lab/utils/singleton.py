import threading


class Singleton(type):
    """One shared instance per class; creation is serialized so worker threads agree on it."""
    _instances = {}
    _lock = threading.RLock()

    def __call__(cls, *args, **kwargs):
        if cls not in cls._instances:
            with cls._lock:
                if cls not in cls._instances:
                    cls._instances[cls] = super(Singleton, cls).__call__(*args, **kwargs)
        return cls._instances[cls]

    def has_instance(cls) -> bool:
        return cls in cls._instances

    def delete_instance(cls) -> bool:
        with cls._lock:
            if cls not in cls._instances:
                return False
            instance = cls._instances.pop(cls)
        cleanup = getattr(instance, 'cleanup', None)
        if callable(cleanup):
            try:
                cleanup()
            except Exception as e:
                print(f"Warning: Error during cleanup of {cls.__name__}: {e}")
        return True
